#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ikr/tensor.hpp"
#include "ikr/weights.hpp"

namespace ikr::nets {

// 3x3 convolution layer description. Weights are stored out x in x 3 x 3
// for both regular and transposed layers.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  bool transpose = false;
  bool bias = true;

  std::vector<std::size_t> weight_dims() const {
    return {static_cast<std::size_t>(out_channels),
            static_cast<std::size_t>(in_channels), 3, 3};
  }
  std::vector<std::size_t> bias_dims() const {
    return {static_cast<std::size_t>(out_channels)};
  }

  void validate() const {
    if (in_channels < 1 || out_channels < 1)
      throw invalid_input("conv: channel counts must be >= 1");
    if (stride != 1 && stride != 2)
      throw invalid_input("conv: stride must be 1 or 2");
  }
};

// Weights of one layer, borrowed from a WeightStore.
struct ConvLayer {
  ConvSpec spec;
  const Tensor* weight = nullptr;
  const Tensor* bias = nullptr;

  // Looks up `<name>.weight` (and `<name>.bias`) and checks their shapes.
  static ConvLayer bind(const WeightStore& ws, const std::string& name,
                        const ConvSpec& spec) {
    spec.validate();
    ConvLayer l{spec, &ws.get(name + ".weight", spec.weight_dims()), nullptr};
    if (spec.bias) l.bias = &ws.get(name + ".bias", spec.bias_dims());
    return l;
  }
};

inline int conv_output_size(int n, int stride, bool transpose) {
  if (transpose) return n * stride;
  return (n + 2 - 3) / stride + 1;
}

// Cross-correlation with zero padding 1. Stride 2 halves even extents; the
// transposed variant (padding 1, output padding stride - 1) multiplies
// extents by the stride.
inline FeatureMap conv2d(const FeatureMap& in, const ConvSpec& spec,
                         const Tensor& weight, const Tensor* bias = nullptr) {
  spec.validate();
  if (in.rank() != 3 || static_cast<int>(in.dim(0)) != spec.in_channels)
    throw invalid_input("conv2d: input channels do not match spec");
  if (weight.dims() != spec.weight_dims())
    throw invalid_input("conv2d: weight dims do not match spec");
  if (spec.bias && (!bias || bias->dims() != spec.bias_dims()))
    throw invalid_input("conv2d: bias missing or mis-shaped");

  const int cin = spec.in_channels, cout = spec.out_channels;
  const int h = static_cast<int>(in.dim(1)), w = static_cast<int>(in.dim(2));
  const int ho = conv_output_size(h, spec.stride, spec.transpose);
  const int wo = conv_output_size(w, spec.stride, spec.transpose);
  if (ho < 1 || wo < 1) throw invalid_input("conv2d: input too small");
  FeatureMap out({static_cast<std::size_t>(cout), static_cast<std::size_t>(ho),
                  static_cast<std::size_t>(wo)});
  const int st = spec.stride;

  for (int o = 0; o < cout; ++o) {
    if (spec.bias) {
      const double b = (*bias)[o];
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) out.at(o, y, x) = b;
    }
    for (int i = 0; i < cin; ++i)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = weight[((o * cin + i) * 3 + ky) * 3 + kx];
          if (wt == 0.0) continue;
          if (!spec.transpose) {
            // out(y, x) += w * in(st*y - 1 + ky, st*x - 1 + kx)
            for (int y = 0; y < ho; ++y) {
              const int iy = st * y - 1 + ky;
              if (iy < 0 || iy >= h) continue;
              for (int x = 0; x < wo; ++x) {
                const int ix = st * x - 1 + kx;
                if (ix < 0 || ix >= w) continue;
                out.at(o, y, x) += wt * in.at(i, iy, ix);
              }
            }
          } else {
            // out(st*y - 1 + ky, st*x - 1 + kx) += w * in(y, x)
            for (int y = 0; y < h; ++y) {
              const int oy = st * y - 1 + ky;
              if (oy < 0 || oy >= ho) continue;
              for (int x = 0; x < w; ++x) {
                const int ox = st * x - 1 + kx;
                if (ox < 0 || ox >= wo) continue;
                out.at(o, oy, ox) += wt * in.at(i, y, x);
              }
            }
          }
        }
  }
  return out;
}

inline FeatureMap conv2d(const FeatureMap& in, const ConvLayer& layer) {
  return conv2d(in, layer.spec, *layer.weight, layer.bias);
}

inline FeatureMap relu(FeatureMap m) {
  for (double& v : m.data()) v = std::max(v, 0.0);
  return m;
}

inline FeatureMap add(FeatureMap a, const FeatureMap& b) {
  if (a.dims() != b.dims()) throw invalid_input("add: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

// Fully connected layer: weight dims out x in, bias dims out.
inline std::vector<double> linear(std::span<const double> in,
                                  const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || weight.dim(1) != in.size() ||
      bias.dims() != std::vector<std::size_t>{weight.dim(0)})
    throw invalid_input("linear: shape mismatch");
  std::vector<double> out(weight.dim(0));
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = bias[o];
    for (std::size_t i = 0; i < in.size(); ++i)
      acc += static_cast<double>(weight[o * in.size() + i]) * in[i];
    out[o] = acc;
  }
  return out;
}

inline double softplus(double v) {
  return v > 30.0 ? v : std::log1p(std::exp(v));
}

// Image <-> feature-map conversion (channel-planar layouts agree).
inline FeatureMap to_feature_map(const Image& img) {
  return FeatureMap({static_cast<std::size_t>(img.channels()),
                     static_cast<std::size_t>(img.height()),
                     static_cast<std::size_t>(img.width())},
                    std::vector<double>(img.data().begin(), img.data().end()));
}

inline Image to_image(const FeatureMap& m) {
  return Image(static_cast<int>(m.dim(1)), static_cast<int>(m.dim(2)),
               static_cast<int>(m.dim(0)),
               std::vector<double>(m.data().begin(), m.data().end()));
}

}  // namespace ikr::nets
