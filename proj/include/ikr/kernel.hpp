#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "ikr/tensor.hpp"
#include "ikr/weights.hpp"

namespace ikr {

inline constexpr int kKernelSize = 21;
inline constexpr int kKernelCenter = 10;
inline constexpr int kKernelTaps = kKernelSize * kKernelSize;

// Unconstrained 21x21 coefficient window, centre tap at (10, 10). This is
// what the kernel data step produces before regularisation.
class KernelWindow {
 public:
  KernelWindow() { coeffs_.fill(0.0); }

  double& at(int row, int col) { return coeffs_[row * kKernelSize + col]; }
  double at(int row, int col) const { return coeffs_[row * kKernelSize + col]; }

  // Tap at signed offset (dr, dc) from the centre.
  double& offset(int dr, int dc) {
    return at(dr + kKernelCenter, dc + kKernelCenter);
  }
  double offset(int dr, int dc) const {
    return at(dr + kKernelCenter, dc + kKernelCenter);
  }

  std::span<const double> coeffs() const { return coeffs_; }
  std::span<double> coeffs() { return coeffs_; }

  double sum() const {
    double s = 0.0;
    for (double c : coeffs_) s += c;
    return s;
  }

  bool operator==(const KernelWindow&) const = default;

 private:
  std::array<double, kKernelTaps> coeffs_;
};

// 21x21 blur kernel: non-negative coefficients summing to one.
class Kernel {
 public:
  static constexpr double kSumTolerance = 1e-6;

  // Validates the invariants; throws invalid_input on violation.
  explicit Kernel(const KernelWindow& w) : w_(w) {
    double s = 0.0;
    for (double c : w_.coeffs()) {
      if (!std::isfinite(c) || c < 0.0)
        throw invalid_input("kernel: coefficients must be finite and >= 0");
      s += c;
    }
    if (std::abs(s - 1.0) > kSumTolerance)
      throw invalid_input("kernel: coefficients must sum to 1");
  }

  static Kernel delta() {
    KernelWindow w;
    w.offset(0, 0) = 1.0;
    return Kernel(w);
  }

  double at(int row, int col) const { return w_.at(row, col); }
  double offset(int dr, int dc) const { return w_.offset(dr, dc); }
  std::span<const double> coeffs() const { return w_.coeffs(); }
  const KernelWindow& window() const { return w_; }

  bool operator==(const Kernel&) const = default;

 private:
  KernelWindow w_;
};

// Clamps negative taps to zero and rescales to unit sum. Returns `fallback`
// when nothing positive remains.
inline Kernel project_to_kernel(const KernelWindow& raw,
                                const Kernel& fallback = Kernel::delta()) {
  KernelWindow w;
  double s = 0.0;
  for (int i = 0; i < kKernelTaps; ++i) {
    const double c = raw.coeffs()[i];
    const double v = std::isfinite(c) ? std::max(c, 0.0) : 0.0;
    w.coeffs()[i] = v;
    s += v;
  }
  if (!(s > 1e-300) || !std::isfinite(s)) return fallback;
  for (double& c : w.coeffs()) c /= s;
  return Kernel(w);
}

inline bool satisfies_kernel_invariants(std::span<const double> coeffs,
                                        double tol = Kernel::kSumTolerance) {
  double s = 0.0;
  for (double c : coeffs) {
    if (!std::isfinite(c) || c < 0.0) return false;
    s += c;
  }
  return std::abs(s - 1.0) <= tol;
}

inline double kernel_mse(const Kernel& est, const Kernel& truth) {
  double acc = 0.0;
  for (int i = 0; i < kKernelTaps; ++i) {
    const double d = est.coeffs()[i] - truth.coeffs()[i];
    acc += d * d;
  }
  return acc / kKernelTaps;
}

// ---------------------------------------------------------------------------
// Placement on a periodic HR grid.
//
// Tap (dr, dc) lands on grid cell (dr mod M, dc mod N), so the centre sits at
// (0, 0). Grids smaller than 21 fold several taps onto one cell (summed).

inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

inline std::vector<double> fold_onto_grid(const KernelWindow& k, int rows,
                                          int cols) {
  std::vector<double> grid(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int dr = -kKernelCenter; dr <= kKernelCenter; ++dr)
    for (int dc = -kKernelCenter; dc <= kKernelCenter; ++dc)
      grid[wrap(dr, rows) * cols + wrap(dc, cols)] += k.offset(dr, dc);
  return grid;
}

// Signed offset represented by grid index i on a periodic axis of length n.
// Cells closer to the far edge read as negative offsets.
inline int grid_offset(int i, int n) { return i <= (n - 1) / 2 ? i : i - n; }

// Inverse of fold_onto_grid for a grid-periodic kernel: grids of 21 or more
// are cropped to the centred window; smaller axes are placed at their signed
// offsets with zeros outside.
inline KernelWindow extract_window(std::span<const double> grid, int rows,
                                   int cols) {
  KernelWindow w;
  auto axis = [](int n) {
    std::vector<std::pair<int, int>> m;  // (grid index, offset)
    if (n >= kKernelSize) {
      for (int d = -kKernelCenter; d <= kKernelCenter; ++d)
        m.emplace_back(wrap(d, n), d);
    } else {
      for (int i = 0; i < n; ++i) m.emplace_back(i, grid_offset(i, n));
    }
    return m;
  };
  for (auto [gi, dr] : axis(rows))
    for (auto [gj, dc] : axis(cols)) w.offset(dr, dc) = grid[gi * cols + gj];
  return w;
}

// ---------------------------------------------------------------------------
// Serialisation: single-tensor weight file (tensor "kernel", 21x21) or a
// plain-text 21x21 grid.

inline WeightStore kernel_to_store(const KernelWindow& k) {
  std::vector<float> data(k.coeffs().begin(), k.coeffs().end());
  WeightStore ws;
  ws.insert("kernel", Tensor({kKernelSize, kKernelSize}, std::move(data)));
  return ws;
}

inline KernelWindow kernel_window_from_store(const WeightStore& ws) {
  const Tensor& t = ws.get("kernel", {kKernelSize, kKernelSize});
  KernelWindow w;
  std::copy(t.data().begin(), t.data().end(), w.coeffs().begin());
  return w;
}

inline std::string kernel_to_text(const KernelWindow& k) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int r = 0; r < kKernelSize; ++r) {
    for (int c = 0; c < kKernelSize; ++c) {
      if (c) os << ' ';
      os << k.at(r, c);
    }
    os << '\n';
  }
  return os.str();
}

inline KernelWindow kernel_from_text(const std::string& text) {
  std::istringstream is(text);
  KernelWindow w;
  for (double& c : w.coeffs())
    if (!(is >> c)) throw data_error("kernel text: expected 441 numbers");
  std::string extra;
  if (is >> extra) throw data_error("kernel text: trailing data");
  return w;
}

// Weight-file format unless the extension is .txt. Float32 storage rounds
// coefficients, so loading renormalises through project_to_kernel.
inline void save_kernel(const KernelWindow& k,
                        const std::filesystem::path& path) {
  if (path.extension() == ".txt") {
    std::ofstream f(path);
    if (!f) throw data_error("cannot open for writing: " + path.string());
    f << kernel_to_text(k);
    return;
  }
  save_weights(kernel_to_store(k), path);
}

inline KernelWindow load_kernel_window(const std::filesystem::path& path) {
  if (path.extension() == ".txt") {
    std::ifstream f(path);
    if (!f) throw data_error("cannot open: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return kernel_from_text(ss.str());
  }
  return kernel_window_from_store(load_weights(path));
}

inline Kernel load_kernel(const std::filesystem::path& path) {
  const KernelWindow raw = load_kernel_window(path);
  for (double c : raw.coeffs())
    if (c < 0.0) throw data_error("kernel file has negative taps: " +
                                  path.string());
  if (std::abs(raw.sum() - 1.0) > 1e-4)
    throw data_error("kernel file does not sum to one: " + path.string());
  return project_to_kernel(raw);
}

}  // namespace ikr
