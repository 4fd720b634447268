#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <mutex>
#include <span>
#include <vector>

#include "ikr/tensor.hpp"

namespace ikr {

using cplx = std::complex<double>;

// Row-major complex 2-D array.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(int rows, int cols, cplx fill = {})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  cplx& operator()(int r, int c) { return data_[r * cols_ + c]; }
  const cplx& operator()(int r, int c) const { return data_[r * cols_ + c]; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  bool same_shape(const ComplexGrid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cplx> data_;
};

namespace detail {

// FFTW's planner is not thread-safe; execution on a plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : p(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* p;
};

inline void run_fft(ComplexGrid& g, int sign) {
  const std::size_t n = g.size();
  FftwBuffer buf(n);
  std::memcpy(buf.p, g.data().data(), sizeof(fftw_complex) * n);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(g.rows(), g.cols(), buf.p, buf.p, sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::memcpy(static_cast<void*>(g.data().data()), buf.p, sizeof(fftw_complex) * n);
}

}  // namespace detail

// Unnormalised forward DFT: X(u,v) = sum x(r,c) exp(-2 pi i (ur/M + vc/N)).
inline ComplexGrid fft2(ComplexGrid g) {
  detail::run_fft(g, FFTW_FORWARD);
  return g;
}

// Inverse DFT including the 1/(MN) factor.
inline ComplexGrid ifft2(ComplexGrid g) {
  detail::run_fft(g, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(g.size());
  for (auto& v : g.data()) v *= scale;
  return g;
}

inline ComplexGrid fft2_real(std::span<const double> plane, int rows,
                             int cols) {
  ComplexGrid g(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = plane[i];
  return fft2(std::move(g));
}

// Inverse transform of a spectrum known to come from a real signal. Returns
// the real part; `max_imag` receives the largest discarded imaginary part.
inline std::vector<double> ifft2_real(const ComplexGrid& spec,
                                      double* max_imag = nullptr) {
  ComplexGrid g = ifft2(spec);
  std::vector<double> out(g.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = g[i].real();
    worst = std::max(worst, std::abs(g[i].imag()));
  }
  if (max_imag) *max_imag = worst;
  return out;
}

// Mean of the s*s aliasing copies of an HR spectrum on the LR grid. With
// unnormalised DFTs, fft2(downsample(w)) == alias_average(fft2(w), s).
inline ComplexGrid alias_average(const ComplexGrid& spec, int s) {
  if (s < 1 || spec.rows() % s || spec.cols() % s)
    throw invalid_input("block_avg: dims not divisible by scale");
  const int lr = spec.rows() / s, lc = spec.cols() / s;
  ComplexGrid out(lr, lc);
  for (int u = 0; u < spec.rows(); ++u)
    for (int v = 0; v < spec.cols(); ++v) out(u % lr, v % lc) += spec(u, v);
  const double inv = 1.0 / (s * s);
  for (auto& c : out.data()) c *= inv;
  return out;
}

}  // namespace ikr
