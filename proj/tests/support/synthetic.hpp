#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "ikr/tensor.hpp"

namespace ikr::testing {

// Piecewise-smooth test scene: a colour gradient, a few flat rectangles and
// discs, and a low-amplitude oriented texture. Values stay inside [0, 1].
inline Image synthetic_image(int h, int w, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, channels);

  std::vector<double> g0(channels), gx(channels), gy(channels);
  for (int c = 0; c < channels; ++c) {
    g0[c] = 0.2 + 0.3 * u(rng);
    gx[c] = 0.3 * (u(rng) - 0.5);
    gy[c] = 0.3 * (u(rng) - 0.5);
  }
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        img.at(c, i, j) = g0[c] + gx[c] * j / w + gy[c] * i / h;

  const int shapes = 6 + static_cast<int>(u(rng) * 6);
  for (int n = 0; n < shapes; ++n) {
    std::vector<double> col(channels);
    for (double& v : col) v = 0.05 + 0.9 * u(rng);
    const double cy = u(rng) * h, cx = u(rng) * w;
    const double ry = (0.05 + 0.2 * u(rng)) * h, rx = (0.05 + 0.2 * u(rng)) * w;
    const bool disc = u(rng) < 0.5;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double dy = (i - cy) / ry, dx = (j - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0
                                 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside)
          for (int c = 0; c < channels; ++c) img.at(c, i, j) = col[c];
      }
  }

  const double freq = 0.15 + 0.25 * u(rng);
  const double angle = std::numbers::pi * u(rng);
  const double amp = 0.05 + 0.05 * u(rng);
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double t = freq * (std::cos(angle) * j + std::sin(angle) * i);
        double& v = img.at(c, i, j);
        v = std::clamp(v + amp * std::sin(t), 0.0, 1.0);
      }
  return img;
}

inline Image random_image(int h, int w, int channels, std::uint64_t seed,
                          double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w, channels);
  for (double& v : img.data()) v = u(rng);
  return img;
}

}  // namespace ikr::testing
