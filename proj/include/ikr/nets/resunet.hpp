#pragma once

#include <random>
#include <string>
#include <vector>

#include "ikr/nets/conv.hpp"
#include "ikr/weights.hpp"

namespace ikr::nets {

// Encoder/decoder with identity skips at every scale. Tensor names, with
// L = widths.size() and l < L - 1:
//
//   <p>.head                      in (+1 for beta) -> widths[0]
//   <p>.enc<l>.res<j>.conv{1,2}   widths[l]
//   <p>.enc<l>.down               widths[l] -> widths[l+1], stride 2
//   <p>.body.res<j>.conv{1,2}     widths[L-1]
//   <p>.dec<l>.up                 widths[l+1] -> widths[l], transposed
//   <p>.dec<l>.res<j>.conv{1,2}   widths[l]
//   <p>.tail                      widths[0] -> out
//
// each suffixed with .weight / .bias.
struct ResUNetConfig {
  int in_channels = 3;
  int out_channels = 3;
  std::vector<int> widths{64, 128, 256, 512};
  int res_blocks = 2;
  bool beta_channel = true;
  bool bias = true;

  int head_inputs() const { return in_channels + (beta_channel ? 1 : 0); }
  int size_multiple() const { return 1 << (widths.size() - 1); }

  void validate() const {
    if (widths.empty()) throw invalid_input("resunet: no scales");
    if (widths.size() > 8) throw invalid_input("resunet: too many scales");
    for (int w : widths)
      if (w < 1) throw invalid_input("resunet: widths must be >= 1");
    if (res_blocks < 0) throw invalid_input("resunet: res_blocks < 0");
    if (in_channels < 1 || out_channels < 1)
      throw invalid_input("resunet: channel counts must be >= 1");
  }

  // Reads the topology back from the tensors stored under `prefix`.
  static ResUNetConfig infer(const WeightStore& ws, const std::string& prefix,
                             bool beta_channel) {
    ResUNetConfig cfg;
    cfg.beta_channel = beta_channel;
    const Tensor& head = ws.get(prefix + ".head.weight");
    if (head.rank() != 4) throw data_error("resunet: bad head weight rank");
    cfg.widths = {static_cast<int>(head.dim(0))};
    cfg.in_channels = static_cast<int>(head.dim(1)) - (beta_channel ? 1 : 0);
    for (int l = 0;; ++l) {
      const std::string name = prefix + ".enc" + std::to_string(l) + ".down.weight";
      if (!ws.contains(name)) break;
      cfg.widths.push_back(static_cast<int>(ws.get(name).dim(0)));
    }
    cfg.res_blocks = 0;
    while (ws.contains(prefix + ".body.res" + std::to_string(cfg.res_blocks) +
                       ".conv1.weight"))
      ++cfg.res_blocks;
    cfg.out_channels = static_cast<int>(ws.get(prefix + ".tail.weight").dim(0));
    cfg.bias = ws.contains(prefix + ".head.bias");
    cfg.validate();
    return cfg;
  }
};

namespace detail {

struct LayerDecl {
  std::string name;
  ConvSpec spec;
};

// Every conv layer of the network, in forward order.
inline std::vector<LayerDecl> resunet_layers(const ResUNetConfig& cfg,
                                             const std::string& p) {
  cfg.validate();
  std::vector<LayerDecl> out;
  auto conv = [&](std::string n, int in, int o, int stride = 1,
                  bool tr = false) {
    out.push_back({std::move(n), ConvSpec{in, o, stride, tr, cfg.bias}});
  };
  auto res = [&](const std::string& stage, int w) {
    for (int j = 0; j < cfg.res_blocks; ++j) {
      const std::string b = stage + ".res" + std::to_string(j);
      conv(b + ".conv1", w, w);
      conv(b + ".conv2", w, w);
    }
  };
  const auto& wd = cfg.widths;
  const int levels = static_cast<int>(wd.size());
  conv(p + ".head", cfg.head_inputs(), wd[0]);
  for (int l = 0; l + 1 < levels; ++l) {
    const std::string st = p + ".enc" + std::to_string(l);
    res(st, wd[l]);
    conv(st + ".down", wd[l], wd[l + 1], 2);
  }
  res(p + ".body", wd[levels - 1]);
  for (int l = levels - 2; l >= 0; --l) {
    const std::string st = p + ".dec" + std::to_string(l);
    conv(st + ".up", wd[l + 1], wd[l], 2, true);
    res(st, wd[l]);
  }
  conv(p + ".tail", wd[0], cfg.out_channels);
  return out;
}

// Numpy-style "reflect" index (edge sample not repeated).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace detail

// Pads bottom/right by reflection so both extents are multiples of `m`.
inline FeatureMap reflect_pad_to_multiple(const FeatureMap& in, int m) {
  const int h = static_cast<int>(in.dim(1)), w = static_cast<int>(in.dim(2));
  const int hp = (h + m - 1) / m * m, wp = (w + m - 1) / m * m;
  if (hp == h && wp == w) return in;
  FeatureMap out({in.dim(0), static_cast<std::size_t>(hp),
                  static_cast<std::size_t>(wp)});
  for (std::size_t c = 0; c < in.dim(0); ++c)
    for (int y = 0; y < hp; ++y)
      for (int x = 0; x < wp; ++x)
        out.at(c, y, x) =
            in.at(c, detail::reflect_index(y, h), detail::reflect_index(x, w));
  return out;
}

inline FeatureMap crop(const FeatureMap& in, int h, int w) {
  FeatureMap out({in.dim(0), static_cast<std::size_t>(h),
                  static_cast<std::size_t>(w)});
  for (std::size_t c = 0; c < in.dim(0); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = in.at(c, y, x);
  return out;
}

// Inference-only ResUNet bound to tensors in a WeightStore. The store must
// outlive the network.
class ResUNet {
 public:
  ResUNet(const WeightStore& ws, std::string prefix, ResUNetConfig cfg)
      : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
    for (const auto& d : detail::resunet_layers(cfg_, prefix_))
      layers_.push_back(ConvLayer::bind(ws, d.name, d.spec));
  }

  const ResUNetConfig& config() const { return cfg_; }

  // Input channels must equal head_inputs(). Extents that are not multiples
  // of 2^(scales-1) are reflect-padded and the output cropped back.
  FeatureMap forward(const FeatureMap& input) const {
    if (static_cast<int>(input.dim(0)) != cfg_.head_inputs())
      throw invalid_input("resunet: wrong number of input channels");
    const int h = static_cast<int>(input.dim(1));
    const int w = static_cast<int>(input.dim(2));
    const FeatureMap x = reflect_pad_to_multiple(input, cfg_.size_multiple());

    std::size_t next = 0;
    auto layer = [&]() -> const ConvLayer& { return layers_[next++]; };
    auto res_stage = [&](FeatureMap m) {
      for (int j = 0; j < cfg_.res_blocks; ++j) {
        const ConvLayer& c1 = layer();
        const ConvLayer& c2 = layer();
        m = add(conv2d(relu(conv2d(m, c1)), c2), m);
      }
      return m;
    };

    const int levels = static_cast<int>(cfg_.widths.size());
    std::vector<FeatureMap> skips;
    FeatureMap m = conv2d(x, layer());
    skips.push_back(m);
    for (int l = 0; l + 1 < levels; ++l) {
      m = res_stage(std::move(m));
      m = conv2d(m, layer());
      skips.push_back(m);
    }
    m = res_stage(std::move(m));
    for (int l = levels - 2; l >= 0; --l) {
      m = conv2d(add(std::move(m), skips[l + 1]), layer());
      m = res_stage(std::move(m));
    }
    m = conv2d(add(std::move(m), skips[0]), layer());
    return crop(m, h, w);
  }

 private:
  ResUNetConfig cfg_;
  std::string prefix_;
  std::vector<ConvLayer> layers_;
};

// ---------------------------------------------------------------------------
// Weight construction helpers (tests, smoke runs, export templates).

// Gaussian weights with the given standard deviation, zero biases.
inline WeightStore random_resunet_weights(const ResUNetConfig& cfg,
                                          const std::string& prefix,
                                          std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, static_cast<float>(stddev));
  WeightStore ws;
  for (const auto& d : detail::resunet_layers(cfg, prefix)) {
    Tensor wt(d.spec.weight_dims());
    for (float& v : wt.data()) v = n(rng);
    ws.insert(d.name + ".weight", std::move(wt));
    if (d.spec.bias) ws.insert(d.name + ".bias", Tensor(d.spec.bias_dims()));
  }
  return ws;
}

inline WeightStore zero_resunet_weights(const ResUNetConfig& cfg,
                                        const std::string& prefix) {
  WeightStore ws;
  for (const auto& d : detail::resunet_layers(cfg, prefix)) {
    ws.insert(d.name + ".weight", Tensor(d.spec.weight_dims()));
    if (d.spec.bias) ws.insert(d.name + ".bias", Tensor(d.spec.bias_dims()));
  }
  return ws;
}

// Weights for which forward() returns its first out_channels inputs: head
// and tail copy channels through the centre tap, every other layer is zero,
// so residual blocks and the coarse path vanish.
inline WeightStore identity_resunet_weights(const ResUNetConfig& cfg,
                                            const std::string& prefix) {
  if (cfg.widths[0] < cfg.out_channels || cfg.head_inputs() < cfg.out_channels)
    throw invalid_input("identity weights: widths[0] too small");
  WeightStore ws = zero_resunet_weights(cfg, prefix);
  auto centre = [](Tensor& t, int o, int i) {
    t[((o * t.dim(1) + i) * 3 + 1) * 3 + 1] = 1.0f;
  };
  Tensor head = ws.get(prefix + ".head.weight");
  Tensor tail = ws.get(prefix + ".tail.weight");
  for (int c = 0; c < cfg.out_channels; ++c) {
    centre(head, c, c);
    centre(tail, c, c);
  }
  ws.insert_or_assign(prefix + ".head.weight", std::move(head));
  ws.insert_or_assign(prefix + ".tail.weight", std::move(tail));
  return ws;
}

}  // namespace ikr::nets
