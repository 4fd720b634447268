#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ikr/fft.hpp"
#include "ikr/kernel.hpp"
#include "ikr/tensor.hpp"

namespace ikr {

// Largest noise level the pipeline is designed for (fraction of range).
inline constexpr double kMaxNoiseSigma = 0.03;

struct DegradationConfig {
  int scale = 2;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  // Permits noise_sigma above kMaxNoiseSigma.
  bool allow_high_noise = false;

  void validate() const {
    if (scale < 1) throw invalid_input("degradation: scale must be >= 1");
    if (!(noise_sigma >= 0.0))
      throw invalid_input("degradation: noise sigma must be >= 0");
    if (noise_sigma > kMaxNoiseSigma && !allow_high_noise)
      throw invalid_input("degradation: noise sigma above 0.03 needs override");
  }
};

// ---------------------------------------------------------------------------
// Kernel generators

// Rotated bivariate Gaussian on the 21x21 grid. sigma_x acts along columns
// and sigma_y along rows before rotation by theta.
inline Kernel gaussian_kernel(double sigma_x, double sigma_y, double theta) {
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
    throw invalid_input("gaussian_kernel: sigmas must be positive");
  const double ct = std::cos(theta), st = std::sin(theta);
  KernelWindow w;
  for (int dy = -kKernelCenter; dy <= kKernelCenter; ++dy)
    for (int dx = -kKernelCenter; dx <= kKernelCenter; ++dx) {
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      w.offset(dy, dx) = std::exp(-0.5 * (u * u / (sigma_x * sigma_x) +
                                          v * v / (sigma_y * sigma_y)));
    }
  return project_to_kernel(w);
}

namespace detail {

inline void splat(KernelWindow& w, double r, double c, double mass) {
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  const double fr = r - r0, fc = c - c0;
  const double wts[2][2] = {{(1 - fr) * (1 - fc), (1 - fr) * fc},
                            {fr * (1 - fc), fr * fc}};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int rr = r0 + a, cc = c0 + b;
      if (rr < 0 || rr >= kKernelSize || cc < 0 || cc >= kKernelSize) continue;
      w.at(rr, cc) += mass * wts[a][b];
    }
}

}  // namespace detail

inline constexpr int kMotionSteps = 64;

// Random camera-shake trajectory. The heading performs a Brownian walk whose
// per-step standard deviation is 0.35 * nonlinearity radians; the path is
// centred on its centroid, shrunk to fit the window if necessary, rasterised
// with bilinear splats along each segment and blurred with a 3x3 Gaussian of
// sigma 0.5 px.
inline Kernel motion_kernel(std::uint64_t rng_seed, double nonlinearity) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double length = 6.0 + 10.0 * unit(rng);
  double heading = 2.0 * std::numbers::pi * unit(rng);
  const double step = length / kMotionSteps;
  const double turn_sd = 0.35 * std::clamp(nonlinearity, 0.0, 1.0);

  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (int i = 0; i < kMotionSteps; ++i) {
    heading += turn_sd * gauss(rng);
    auto [r, c] = pts.back();
    pts.emplace_back(r + step * std::sin(heading), c + step * std::cos(heading));
  }

  double mr = 0.0, mc = 0.0;
  for (auto [r, c] : pts) mr += r, mc += c;
  mr /= pts.size();
  mc /= pts.size();
  double extent = 0.0;
  for (auto& [r, c] : pts) {
    r -= mr;
    c -= mc;
    extent = std::max({extent, std::abs(r), std::abs(c)});
  }
  // Keep the path (plus blur footprint) inside the window.
  constexpr double kMaxExtent = kKernelCenter - 2.0;
  const double shrink = extent > kMaxExtent ? kMaxExtent / extent : 1.0;

  KernelWindow path;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [r0, c0] = pts[i];
    const auto [r1, c1] = pts[i + 1];
    const double seg = std::hypot(r1 - r0, c1 - c0) * shrink;
    const int n = std::max(1, static_cast<int>(std::ceil(seg / 0.25)));
    for (int k = 0; k < n; ++k) {
      const double t = (k + 0.5) / n;
      detail::splat(path, kKernelCenter + shrink * (r0 + t * (r1 - r0)),
                    kKernelCenter + shrink * (c0 + t * (c1 - c0)), seg / n);
    }
  }
  // Degenerate zero-length path.
  if (path.sum() <= 0.0) path.offset(0, 0) = 1.0;

  double g[3];
  for (int i = 0; i < 3; ++i) g[i] = std::exp(-0.5 * (i - 1) * (i - 1) / 0.25);
  KernelWindow blurred;
  for (int r = 0; r < kKernelSize; ++r)
    for (int c = 0; c < kKernelSize; ++c) {
      const double v = path.at(r, c);
      if (v == 0.0) continue;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
          const int rr = r + a, cc = c + b;
          if (rr < 0 || rr >= kKernelSize || cc < 0 || cc >= kKernelSize)
            continue;
          blurred.at(rr, cc) += v * g[a + 1] * g[b + 1];
        }
    }
  return project_to_kernel(blurred);
}

// ---------------------------------------------------------------------------
// Linear operators (per channel, periodic boundary)

namespace detail {

struct Tap {
  int dr, dc;
  double w;
};

// Nonzero taps of k folded onto a rows x cols periodic grid.
inline std::vector<Tap> grid_taps(const KernelWindow& k, int rows, int cols) {
  const auto grid = fold_onto_grid(k, rows, cols);
  std::vector<Tap> taps;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (grid[r * cols + c] != 0.0) taps.push_back({r, c, grid[r * cols + c]});
  return taps;
}

// Above this many taps the circular product is done through the DFT.
inline constexpr std::size_t kDirectTapLimit = 48;

// Filters the channels two at a time as the real and imaginary parts of one
// complex signal (the kernel is real), then folds the spectrum onto the
// decimated grid before inverting.
template <int Sign>
Image apply_taps_fft(const Image& x, const std::vector<double>& grid, int s) {
  const int h = x.height(), w = x.width();
  const ComplexGrid g = fft2_real(grid, h, w);
  Image out(h / s, w / s, x.channels());
  for (int ch = 0; ch < x.channels(); ch += 2) {
    const bool pair = ch + 1 < x.channels();
    ComplexGrid f(h, w);
    auto re = x.plane(ch);
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] = pair ? cplx(re[i], x.plane(ch + 1)[i]) : cplx(re[i], 0.0);
    f = fft2(std::move(f));
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] *= Sign > 0 ? g[i] : std::conj(g[i]);
    const ComplexGrid r = ifft2(s == 1 ? std::move(f) : alias_average(f, s));
    auto o0 = out.plane(ch);
    for (std::size_t i = 0; i < r.size(); ++i) o0[i] = r[i].real();
    if (pair) {
      auto o1 = out.plane(ch + 1);
      for (std::size_t i = 0; i < r.size(); ++i) o1[i] = r[i].imag();
    }
  }
  return out;
}

template <int Sign>
Image apply_taps(const Image& x, const KernelWindow& k) {
  const int h = x.height(), w = x.width();
  const auto taps = grid_taps(k, h, w);
  if (taps.size() > kDirectTapLimit)
    return apply_taps_fft<Sign>(x, fold_onto_grid(k, h, w), 1);
  Image out(h, w, x.channels());
  for (int ch = 0; ch < x.channels(); ++ch) {
    auto src = x.plane(ch);
    auto dst = out.plane(ch);
    for (const Tap& t : taps)
      for (int i = 0; i < h; ++i) {
        const int si = wrap(i - Sign * t.dr, h);
        const double* row = src.data() + static_cast<std::size_t>(si) * w;
        double* drow = dst.data() + static_cast<std::size_t>(i) * w;
        const int shift = wrap(-Sign * t.dc, w);
        for (int j = 0; j < w; ++j) {
          int sj = j + shift;
          if (sj >= w) sj -= w;
          drow[j] += t.w * row[sj];
        }
      }
  }
  return out;
}

}  // namespace detail

// out(i, j) = sum_{a,b} k(a, b) x(i - a, j - b), offsets relative to the
// kernel centre, indices modulo the image size. A delta kernel is the
// identity. Images smaller than the kernel see it folded onto their grid.
inline Image convolve_circular(const Image& x, const KernelWindow& k) {
  return detail::apply_taps<1>(x, k);
}
inline Image convolve_circular(const Image& x, const Kernel& k) {
  return convolve_circular(x, k.window());
}

// Adjoint of convolve_circular: out(i, j) = sum k(a, b) x(i + a, j + b).
inline Image correlate_circular(const Image& x, const KernelWindow& k) {
  return detail::apply_taps<-1>(x, k);
}
inline Image correlate_circular(const Image& x, const Kernel& k) {
  return correlate_circular(x, k.window());
}

// Keeps the upper-left sample of every s x s block.
inline Image downsample_s(const Image& x, int s) {
  if (s < 1) throw invalid_input("downsample: scale must be >= 1");
  if (x.height() % s || x.width() % s)
    throw invalid_input("downsample: image dims " + std::to_string(x.height()) +
                        "x" + std::to_string(x.width()) +
                        " not divisible by scale " + std::to_string(s));
  const int h = x.height() / s, w = x.width() / s;
  Image out(h, w, x.channels());
  for (int c = 0; c < x.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(c, i, j) = x.at(c, s * i, s * j);
  return out;
}

// downsample_s(convolve_circular(x, k), s) without forming the HR product
// when the kernel is dense.
inline Image blur_decimate(const Image& x, const KernelWindow& k, int s) {
  if (s < 1) throw invalid_input("blur_decimate: scale must be >= 1");
  if (x.height() % s || x.width() % s)
    throw invalid_input("blur_decimate: image dims not divisible by scale " +
                        std::to_string(s));
  if (detail::grid_taps(k, x.height(), x.width()).size() > detail::kDirectTapLimit)
    return detail::apply_taps_fft<1>(x, fold_onto_grid(k, x.height(), x.width()), s);
  return downsample_s(convolve_circular(x, k), s);
}
inline Image blur_decimate(const Image& x, const Kernel& k, int s) {
  return blur_decimate(x, k.window(), s);
}

// Zero-filled upsampling: out(s i, s j) = y(i, j), zeros elsewhere.
inline Image upsample_zero(const Image& y, int s) {
  if (s < 1) throw invalid_input("upsample: scale must be >= 1");
  Image out(y.height() * s, y.width() * s, y.channels());
  for (int c = 0; c < y.channels(); ++c)
    for (int i = 0; i < y.height(); ++i)
      for (int j = 0; j < y.width(); ++j) out.at(c, s * i, s * j) = y.at(c, i, j);
  return out;
}

// Additive white Gaussian noise, not clipped.
inline Image add_noise(const Image& x, double sigma, std::uint64_t rng_seed) {
  if (!(sigma >= 0.0)) throw invalid_input("add_noise: sigma must be >= 0");
  if (sigma == 0.0) return x;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> n(0.0, sigma);
  Image out = x;
  for (double& v : out.data()) v += n(rng);
  return out;
}

// y = (x conv k) downsampled by s, plus noise.
inline Image degrade(const Image& x, const Kernel& k,
                     const DegradationConfig& cfg) {
  cfg.validate();
  if (x.height() % cfg.scale || x.width() % cfg.scale)
    throw invalid_input("degrade: image dims not divisible by scale " +
                        std::to_string(cfg.scale));
  return add_noise(blur_decimate(x, k, cfg.scale),
                   cfg.noise_sigma, cfg.rng_seed);
}

}  // namespace ikr
