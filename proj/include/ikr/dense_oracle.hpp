#pragma once

#include <Eigen/Dense>

#include "ikr/kernel.hpp"
#include "ikr/tensor.hpp"

// Brute-force reference solutions for the two data steps: the operator is
// assembled as an explicit matrix and the normal equations are solved with a
// dense Cholesky factorisation. Nothing here touches the FFT path.

namespace ikr::oracle {

inline constexpr int kMaxGridCells = 32 * 32;

namespace detail {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

inline void check_grid(int rows, int cols, int s, const char* what) {
  if (rows * cols > kMaxGridCells)
    throw invalid_input(std::string(what) + ": HR grid larger than 32x32");
  if (s < 1 || rows % s || cols % s)
    throw invalid_input(std::string(what) + ": HR dims not divisible by scale");
}

inline Eigen::VectorXd solve_normal(const Eigen::MatrixXd& a,
                                    const Eigen::VectorXd& rhs_data,
                                    const Eigen::VectorXd& anchor, double reg) {
  Eigen::MatrixXd normal = a.transpose() * a;
  normal.diagonal().array() += reg;
  Eigen::VectorXd rhs = a.transpose() * rhs_data + reg * anchor;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("dense oracle: factorisation failed");
  return llt.solve(rhs);
}

}  // namespace detail

// Matrix of z -> (z conv k) decimated by s on a rows x cols periodic grid.
// Row index: LR pixel (i, j) -> i * (cols / s) + j. Column: HR pixel.
inline Eigen::MatrixXd conv_decimate_matrix(const KernelWindow& k, int rows,
                                            int cols, int s) {
  detail::check_grid(rows, cols, s, "conv_decimate_matrix");
  const int lr = rows / s, lc = cols / s;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(lr * lc, rows * cols);
  for (int i = 0; i < lr; ++i)
    for (int j = 0; j < lc; ++j)
      for (int dr = -kKernelCenter; dr <= kKernelCenter; ++dr)
        for (int dc = -kKernelCenter; dc <= kKernelCenter; ++dc) {
          const int p = detail::wrap(s * i - dr, rows);
          const int q = detail::wrap(s * j - dc, cols);
          a(i * lc + j, p * cols + q) += k.offset(dr, dc);
        }
  return a;
}

// Matrix of w -> (x conv w) decimated by s, where w is a kernel living on the
// periodic grid (column p * cols + q is the tap at grid offset (p, q)).
inline Eigen::MatrixXd patch_matrix(std::span<const double> x, int rows,
                                    int cols, int s) {
  detail::check_grid(rows, cols, s, "patch_matrix");
  const int lr = rows / s, lc = cols / s;
  Eigen::MatrixXd a(lr * lc, rows * cols);
  for (int i = 0; i < lr; ++i)
    for (int j = 0; j < lc; ++j)
      for (int p = 0; p < rows; ++p)
        for (int q = 0; q < cols; ++q)
          a(i * lc + j, p * cols + q) =
              x[detail::wrap(s * i - p, rows) * cols +
                detail::wrap(s * j - q, cols)];
  return a;
}

inline Image dense_oracle_z(const Image& y, const Image& x_prev,
                            const KernelWindow& k, double alpha, int s) {
  if (!(alpha > 0.0)) throw invalid_input("dense_oracle_z: alpha must be > 0");
  const int rows = x_prev.height(), cols = x_prev.width();
  if (y.height() * s != rows || y.width() * s != cols)
    throw invalid_input("dense_oracle_z: HR dims must be s * LR dims");
  const Eigen::MatrixXd a = conv_decimate_matrix(k, rows, cols, s);

  Image z(rows, cols, x_prev.channels());
  for (int c = 0; c < x_prev.channels(); ++c) {
    auto yp = y.plane(c);
    auto xp = x_prev.plane(c);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(
        yp.data(), static_cast<Eigen::Index>(yp.size()));
    Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(
        xp.data(), static_cast<Eigen::Index>(xp.size()));
    const Eigen::VectorXd sol = detail::solve_normal(a, yv, xv, alpha);
    std::copy(sol.data(), sol.data() + sol.size(), z.plane(c).begin());
  }
  return z;
}

inline Image dense_oracle_z(const Image& y, const Image& x_prev,
                            const Kernel& k, double alpha, int s) {
  return dense_oracle_z(y, x_prev, k.window(), alpha, s);
}

// Grid-periodic solution of the kernel step (row-major on the HR grid).
inline std::vector<double> dense_oracle_w_grid(const Image& y, const Image& x,
                                               const KernelWindow& k_prev,
                                               double gamma, int s) {
  if (!(gamma > 0.0)) throw invalid_input("dense_oracle_w: gamma must be > 0");
  const int rows = x.height(), cols = x.width();
  if (y.height() * s != rows || y.width() * s != cols)
    throw invalid_input("dense_oracle_w: HR dims must be s * LR dims");

  // Channel means, computed here rather than shared with the FFT path.
  std::vector<double> xl(static_cast<std::size_t>(rows) * cols, 0.0);
  Eigen::VectorXd yl = Eigen::VectorXd::Zero(y.height() * y.width());
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t i = 0; i < xl.size(); ++i)
      xl[i] += x.plane(c)[i] / x.channels();
    for (Eigen::Index i = 0; i < yl.size(); ++i)
      yl[i] += y.plane(c)[i] / y.channels();
  }

  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(rows * cols);
  for (int dr = -kKernelCenter; dr <= kKernelCenter; ++dr)
    for (int dc = -kKernelCenter; dc <= kKernelCenter; ++dc)
      anchor[detail::wrap(dr, rows) * cols + detail::wrap(dc, cols)] +=
          k_prev.offset(dr, dc);

  const Eigen::MatrixXd a = patch_matrix(xl, rows, cols, s);
  const Eigen::VectorXd sol = detail::solve_normal(a, yl, anchor, gamma);
  return {sol.data(), sol.data() + sol.size()};
}

inline KernelWindow dense_oracle_w(const Image& y, const Image& x,
                                   const KernelWindow& k_prev, double gamma,
                                   int s) {
  const auto grid = dense_oracle_w_grid(y, x, k_prev, gamma, s);
  return extract_window(grid, x.height(), x.width());
}

inline KernelWindow dense_oracle_w(const Image& y, const Image& x,
                                   const Kernel& k_prev, double gamma, int s) {
  return dense_oracle_w(y, x, k_prev.window(), gamma, s);
}

}  // namespace ikr::oracle
