#pragma once

#include <cmath>

#include "ikr/degradation.hpp"
#include "ikr/kernel.hpp"
#include "ikr/tensor.hpp"

// Weight-free stand-ins for the learned modules.

namespace ikr::nets {

// Joint-channel bilateral filter, 5x5 window, spatial sigma 1 px, range
// sigma 2 * beta. beta == 0 returns the input unchanged.
inline Image classical_denoiser(const Image& z, double beta) {
  if (!(beta >= 0.0)) throw invalid_input("classical_denoiser: beta < 0");
  if (beta == 0.0) return z;
  constexpr int kRadius = 2;
  constexpr double kSpatialSigma = 1.0;
  const double range_sigma = 2.0 * beta;
  const double inv_range = 1.0 / (2.0 * range_sigma * range_sigma);

  double spatial[2 * kRadius + 1][2 * kRadius + 1];
  for (int a = -kRadius; a <= kRadius; ++a)
    for (int b = -kRadius; b <= kRadius; ++b)
      spatial[a + kRadius][b + kRadius] =
          std::exp(-(a * a + b * b) / (2.0 * kSpatialSigma * kSpatialSigma));

  const int h = z.height(), w = z.width(), nc = z.channels();
  Image out(h, w, nc);
  std::vector<double> acc(nc);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double norm = 0.0;
      for (int a = -kRadius; a <= kRadius; ++a) {
        const int ii = std::clamp(i + a, 0, h - 1);
        for (int b = -kRadius; b <= kRadius; ++b) {
          const int jj = std::clamp(j + b, 0, w - 1);
          double dist = 0.0;
          for (int c = 0; c < nc; ++c) {
            const double d = z.at(c, ii, jj) - z.at(c, i, j);
            dist += d * d;
          }
          const double wt =
              spatial[a + kRadius][b + kRadius] * std::exp(-dist / nc * inv_range);
          norm += wt;
          for (int c = 0; c < nc; ++c) acc[c] += wt * z.at(c, ii, jj);
        }
      }
      for (int c = 0; c < nc; ++c) out.at(c, i, j) = acc[c] / norm;
    }
  return out;
}

// Kernel regulariser fallback: non-negativity and unit-sum projection.
inline Kernel classical_kernel_regularizer(const KernelWindow& w) {
  return project_to_kernel(w);
}

inline Kernel default_initial_kernel() { return gaussian_kernel(1.0, 1.0, 0.0); }

struct NoiseEstimate {
  double sigma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline constexpr double kAlphaFloor = 1e-6;
// Fixed splitting penalty: alpha = kAlphaGain * sigma^2. With a unit gain the
// image step refits the noise in one pass, the residual collapses and
// noisy non-blind runs diverge.
inline constexpr double kAlphaGain = 100.0;

// Data-term weight tracks the noise variance; denoising strength tracks the
// noise level.
inline NoiseEstimate classical_hyper_params(double sigma) {
  return {sigma, std::max(kAlphaGain * sigma * sigma, kAlphaFloor), sigma};
}

// y - (x_prev conv k) decimated.
inline Image reconstruction_residual(const Image& y, const Image& x_prev,
                                     const KernelWindow& k, int s) {
  if (x_prev.height() != y.height() * s || x_prev.width() != y.width() * s ||
      x_prev.channels() != y.channels())
    throw invalid_input("noise_estimate: dims inconsistent with scale");
  const Image yd = blur_decimate(x_prev, k, s);
  Image r = y;
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] -= yd.data()[i];
  return r;
}

// Sample standard deviation (n - 1 denominator) of every residual sample.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

inline NoiseEstimate classical_noise_estimate(const Image& y,
                                              const Image& x_prev,
                                              const KernelWindow& k, int s) {
  const Image r = reconstruction_residual(y, x_prev, k, s);
  return classical_hyper_params(sample_std(r.data()));
}

}  // namespace ikr::nets
