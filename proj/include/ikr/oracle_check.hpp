#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "ikr/dense_oracle.hpp"
#include "ikr/fourier_solver.hpp"

// Randomised comparison of the FFT data steps against the dense solves.

namespace ikr {

struct OracleCheckConfig {
  int trials = 50;  // per scale
  int min_size = 8;
  int max_size = 16;
  std::vector<int> scales{1, 2, 4};
  std::vector<double> alphas{0.01, 0.1, 1.0};
  std::vector<double> gammas{0.01, 0.1};
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
};

struct OracleCheckResult {
  int instances = 0;
  double worst_z = 0.0;
  double worst_w = 0.0;
  bool passed = false;

  double worst() const { return std::max(worst_z, worst_w); }
};

inline double relative_error(std::span<const double> got,
                             std::span<const double> want) {
  if (got.size() != want.size()) throw invalid_input("relative_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

// Non-negative taps on a random square support, normalised.
inline Kernel random_kernel(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> radius(0, kKernelCenter);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int r = radius(rng);
  KernelWindow w;
  for (int dr = -r; dr <= r; ++dr)
    for (int dc = -r; dc <= r; ++dc) w.offset(dr, dc) = u(rng);
  return project_to_kernel(w);
}

inline Image random_image(std::mt19937_64& rng, int h, int w, int channels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, channels);
  for (double& v : img.data()) v = u(rng);
  return img;
}

template <typename Ops = SpectralBlockOps>
OracleCheckResult run_oracle_check(const OracleCheckConfig& cfg) {
  if (cfg.trials < 1) throw invalid_input("oracle-check: trials must be >= 1");
  if (cfg.min_size < 1 || cfg.max_size < cfg.min_size)
    throw invalid_input("oracle-check: bad size range");
  if (cfg.max_size * cfg.max_size > oracle::kMaxGridCells)
    throw invalid_input("oracle-check: max size too large for the dense solve");
  if (cfg.scales.empty() || cfg.alphas.empty() || cfg.gammas.empty())
    throw invalid_input("oracle-check: empty parameter list");

  std::mt19937_64 rng(cfg.seed);
  OracleCheckResult res;
  for (int s : cfg.scales) {
    if (s < 1 || s > cfg.max_size) throw invalid_input("oracle-check: bad scale");
    const int lo = std::max(1, (cfg.min_size + s - 1) / s);
    const int hi = cfg.max_size / s;
    if (lo > hi)
      throw invalid_input("oracle-check: no grid size in range is divisible by scale");
    std::uniform_int_distribution<int> lr_dim(lo, hi);
    std::uniform_int_distribution<std::size_t> pick_a(0, cfg.alphas.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_g(0, cfg.gammas.size() - 1);
    std::bernoulli_distribution color(0.5);

    for (int t = 0; t < cfg.trials; ++t) {
      const int lh = lr_dim(rng), lw = lr_dim(rng);
      const int ch = color(rng) ? 3 : 1;
      const Image y = random_image(rng, lh, lw, ch);
      const Image x = random_image(rng, lh * s, lw * s, ch);
      const Kernel k = random_kernel(rng);
      const double alpha = cfg.alphas[pick_a(rng)];
      const double gamma = cfg.gammas[pick_g(rng)];

      const Image z = data_step_z<Ops>(y, x, k, alpha, s);
      const Image z_ref = oracle::dense_oracle_z(y, x, k, alpha, s);
      res.worst_z = std::max(res.worst_z, relative_error(z.data(), z_ref.data()));

      const KernelWindow w = data_step_w<Ops>(y, x, k, gamma, s);
      const KernelWindow w_ref = oracle::dense_oracle_w(y, x, k, gamma, s);
      res.worst_w =
          std::max(res.worst_w, relative_error(w.coeffs(), w_ref.coeffs()));
      ++res.instances;
    }
  }
  // NaN never passes.
  res.passed = res.worst() < cfg.tolerance;
  return res;
}

}  // namespace ikr
