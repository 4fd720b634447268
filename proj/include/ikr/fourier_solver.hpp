#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "ikr/degradation.hpp"
#include "ikr/fft.hpp"
#include "ikr/kernel.hpp"
#include "ikr/tensor.hpp"

namespace ikr {

// Default kernel-step regulariser. Smaller values let the blind loop drift
// towards over-wide kernels once the noise estimate reaches zero.
inline constexpr double kDefaultGamma = 5.0;

// Largest imaginary residue (relative to the output magnitude) tolerated
// after inverse transforms of conjugate-symmetric spectra.
inline constexpr double kImagResidueTol = 1e-6;

// Spectral "distinct block" operators for an s-fold decimated periodic grid.
//
// For an M x N HR grid with s | M, N, the LR grid is (M/s) x (N/s) and each HR
// frequency (u, v) aliases onto LR frequency (u mod M/s, v mod N/s).
struct SpectralBlockOps {
  // Tiles the LR-grid factor s x s times and multiplies element-wise.
  static ComplexGrid block_mul(const ComplexGrid& spec,
                               const ComplexGrid& factor, int s) {
    if (spec.rows() != factor.rows() * s || spec.cols() != factor.cols() * s)
      throw invalid_input("block_mul: HR dims must equal s * LR dims");
    ComplexGrid out(spec.rows(), spec.cols());
    const int lr = factor.rows(), lc = factor.cols();
    for (int u = 0; u < spec.rows(); ++u)
      for (int v = 0; v < spec.cols(); ++v)
        out(u, v) = spec(u, v) * factor(u % lr, v % lc);
    return out;
  }

  // Mean of the s*s aliasing copies. With unnormalised DFTs this is exactly
  // the spectrum of the decimated signal: fft2(downsample(w)) ==
  // block_avg(fft2(w)).
  static ComplexGrid block_avg(const ComplexGrid& spec, int s) {
    return alias_average(spec, s);
  }
};

inline ComplexGrid block_mul(const ComplexGrid& spec, const ComplexGrid& factor,
                             int s) {
  return SpectralBlockOps::block_mul(spec, factor, s);
}

inline ComplexGrid block_avg(const ComplexGrid& spec, int s) {
  return SpectralBlockOps::block_avg(spec, s);
}

// Spectra entering one closed-form data step, all on the HR grid.
struct SpectralOperand {
  ComplexGrid op;         // transfer function of the fixed factor (k or x)
  ComplexGrid upsampled;  // F(y upsampled with zeros)
  ComplexGrid anchor;     // F(previous estimate)
  int scale = 1;

  void validate() const {
    if (!op.same_shape(upsampled) || !op.same_shape(anchor))
      throw invalid_input("spectral operand: arrays differ in shape");
    if (scale < 1 || op.rows() % scale || op.cols() % scale)
      throw invalid_input("spectral operand: HR dims not divisible by scale");
  }
};

// Minimiser of ||y - (A u) decimated||^2 + reg ||u - anchor||^2 where A is
// circular convolution with `op`, solved per frequency via the Woodbury
// identity on the aliasing blocks:
//
//   d = conj(F_op) F(y_up) + reg F(anchor)
//   F(u) = (d - conj(F_op) (.)_s [ avg_s(F_op d) / (avg_s(|F_op|^2) + reg) ]) / reg
template <typename Ops = SpectralBlockOps>
ComplexGrid solve_block_system(const SpectralOperand& in, double reg) {
  in.validate();
  const std::size_t n = in.op.size();
  ComplexGrid conj_op(in.op.rows(), in.op.cols());
  ComplexGrid power(in.op.rows(), in.op.cols());
  ComplexGrid d(in.op.rows(), in.op.cols());
  for (std::size_t i = 0; i < n; ++i) {
    conj_op[i] = std::conj(in.op[i]);
    power[i] = std::norm(in.op[i]);
    d[i] = conj_op[i] * in.upsampled[i] + reg * in.anchor[i];
  }
  ComplexGrid op_d(in.op.rows(), in.op.cols());
  for (std::size_t i = 0; i < n; ++i) op_d[i] = in.op[i] * d[i];

  ComplexGrid ratio = Ops::block_avg(op_d, in.scale);
  const ComplexGrid den = Ops::block_avg(power, in.scale);
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] /= den[i] + reg;

  const ComplexGrid corr = Ops::block_mul(conj_op, ratio, in.scale);
  ComplexGrid out(in.op.rows(), in.op.cols());
  const double inv = 1.0 / reg;
  for (std::size_t i = 0; i < n; ++i) out[i] = (d[i] - corr[i]) * inv;
  return out;
}

namespace detail {

inline std::vector<double> real_or_throw(const ComplexGrid& spec,
                                         const char* what) {
  double max_imag = 0.0;
  auto out = ifft2_real(spec, &max_imag);
  double scale = 1.0;
  for (double v : out) scale = std::max(scale, std::abs(v));
  if (max_imag > kImagResidueTol * scale)
    throw std::logic_error(std::string(what) +
                           ": imaginary residue after inverse FFT");
  return out;
}

inline void check_lr_hr(const Image& y, const Image& x, int s,
                        const char* what) {
  if (s < 1) throw invalid_input(std::string(what) + ": scale must be >= 1");
  if (x.height() != y.height() * s || x.width() != y.width() * s)
    throw invalid_input(std::string(what) + ": HR dims must be s * LR dims");
}

}  // namespace detail

// Image data step: argmin_z ||y - (z conv k) decimated||^2 + alpha ||z - x_prev||^2,
// solved independently per channel.
template <typename Ops = SpectralBlockOps>
Image data_step_z(const Image& y, const Image& x_prev, const KernelWindow& k,
                  double alpha, int s) {
  if (!(alpha > 0.0)) throw invalid_input("data_step_z: alpha must be > 0");
  detail::check_lr_hr(y, x_prev, s, "data_step_z");
  if (y.channels() != x_prev.channels())
    throw invalid_input("data_step_z: channel mismatch");
  const int rows = x_prev.height(), cols = x_prev.width();

  SpectralOperand in;
  in.scale = s;
  in.op = fft2_real(fold_onto_grid(k, rows, cols), rows, cols);
  const Image y_up = upsample_zero(y, s);

  Image z(rows, cols, x_prev.channels());
  for (int c = 0; c < x_prev.channels(); ++c) {
    in.upsampled = fft2_real(y_up.plane(c), rows, cols);
    in.anchor = fft2_real(x_prev.plane(c), rows, cols);
    const auto plane = detail::real_or_throw(
        solve_block_system<Ops>(in, alpha), "data_step_z");
    std::copy(plane.begin(), plane.end(), z.plane(c).begin());
  }
  return z;
}

template <typename Ops = SpectralBlockOps>
Image data_step_z(const Image& y, const Image& x_prev, const Kernel& k,
                  double alpha, int s) {
  return data_step_z<Ops>(y, x_prev, k.window(), alpha, s);
}

// Kernel step solved on the full periodic HR grid, with the image as the
// fixed convolution factor. Returns the grid-periodic solution (row-major,
// centre tap at cell (0, 0)). Multi-channel inputs are averaged to one
// channel first.
template <typename Ops = SpectralBlockOps>
std::vector<double> data_step_w_grid(const Image& y, const Image& x,
                                     const KernelWindow& k_prev, double gamma,
                                     int s) {
  if (!(gamma > 0.0)) throw invalid_input("data_step_w: gamma must be > 0");
  detail::check_lr_hr(y, x, s, "data_step_w");
  const Image yl = channel_mean(y);
  const Image xl = channel_mean(x);
  const int rows = x.height(), cols = x.width();

  SpectralOperand in;
  in.scale = s;
  in.op = fft2_real(xl.plane(0), rows, cols);
  in.upsampled = fft2_real(upsample_zero(yl, s).plane(0), rows, cols);
  in.anchor = fft2_real(fold_onto_grid(k_prev, rows, cols), rows, cols);
  return detail::real_or_throw(solve_block_system<Ops>(in, gamma),
                               "data_step_w");
}

// Kernel data step: argmin_w ||y - (x conv w) decimated||^2 + gamma ||w - k_prev||^2,
// cropped to the 21x21 window.
template <typename Ops = SpectralBlockOps>
KernelWindow data_step_w(const Image& y, const Image& x,
                         const KernelWindow& k_prev, double gamma, int s) {
  const auto grid = data_step_w_grid<Ops>(y, x, k_prev, gamma, s);
  return extract_window(grid, x.height(), x.width());
}

template <typename Ops = SpectralBlockOps>
KernelWindow data_step_w(const Image& y, const Image& x, const Kernel& k_prev,
                         double gamma, int s) {
  return data_step_w<Ops>(y, x, k_prev.window(), gamma, s);
}

// ||y - (z conv k) decimated||^2 + alpha ||z - x_prev||^2
inline double hqs_objective(const Image& y, const Image& z,
                            const Image& x_prev, const KernelWindow& k,
                            double alpha, int s) {
  const Image r = blur_decimate(z, k, s);
  double data = 0.0, prox = 0.0;
  for (std::size_t i = 0; i < r.data().size(); ++i) {
    const double d = y.data()[i] - r.data()[i];
    data += d * d;
  }
  for (std::size_t i = 0; i < z.data().size(); ++i) {
    const double d = z.data()[i] - x_prev.data()[i];
    prox += d * d;
  }
  return data + alpha * prox;
}

}  // namespace ikr
