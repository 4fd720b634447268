#pragma once

#include <algorithm>
#include <cmath>

#include "ikr/tensor.hpp"

namespace ikr {

// Bilinear upscaling by an integer factor, half-pixel (align_corners=false)
// convention: output pixel centre (i + 0.5) maps to input coordinate
// (i + 0.5) / s - 0.5, clamped at the borders.
inline Image bilinear_upscale(const Image& y, int s) {
  if (s < 1) throw invalid_input("bilinear_upscale: scale must be >= 1");
  if (s == 1) return y;
  const int h = y.height(), w = y.width();
  Image out(h * s, w * s, y.channels());

  // a + t(b - a) returns a exactly when a == b, so constants survive.
  auto lerp = [](double a, double b, double t) { return a + t * (b - a); };

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps = [s](int n_out, int n_in) {
    std::vector<Tap> t(n_out);
    for (int i = 0; i < n_out; ++i) {
      double src = (i + 0.5) / s - 0.5;
      src = std::max(src, 0.0);
      int i0 = std::min(static_cast<int>(std::floor(src)), n_in - 1);
      int i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto ty = taps(h * s, h);
  const auto tx = taps(w * s, w);

  for (int c = 0; c < y.channels(); ++c)
    for (int i = 0; i < h * s; ++i)
      for (int j = 0; j < w * s; ++j) {
        const Tap& a = ty[i];
        const Tap& b = tx[j];
        const double top = lerp(y.at(c, a.i0, b.i0), y.at(c, a.i0, b.i1), b.frac);
        const double bot = lerp(y.at(c, a.i1, b.i0), y.at(c, a.i1, b.i1), b.frac);
        out.at(c, i, j) = lerp(top, bot, a.frac);
      }
  return out;
}

}  // namespace ikr
