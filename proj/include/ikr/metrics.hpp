#pragma once

#include <cmath>

#include "ikr/tensor.hpp"

namespace ikr {

// Returned by psnr() when the two inputs are identical.
inline constexpr double kPsnrCap = 99.0;

inline double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw invalid_input("mse: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m) {
  if (m == 0.0) return kPsnrCap;
  return 10.0 * std::log10(1.0 / m);
}

// Peak value 1.0, MSE over every sample of every channel.
inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw invalid_input("psnr: dimension mismatch");
  return psnr_from_mse(mse(a.data(), b.data()));
}

// BT.601 luma.
inline Image luminance(const Image& rgb) {
  if (rgb.channels() != 3)
    throw invalid_input("luminance: expected a 3-channel image");
  Image y(rgb.height(), rgb.width(), 1);
  auto r = rgb.plane(0), g = rgb.plane(1), b = rgb.plane(2);
  auto out = y.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

inline double psnr_y(const Image& a, const Image& b) {
  if (a.channels() != 3 || b.channels() != 3)
    throw invalid_input("psnr_y: both images must have 3 channels");
  return psnr(luminance(a), luminance(b));
}

}  // namespace ikr
