#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ikr/metrics.hpp"
#include "ikr/pipeline.hpp"

namespace ikr {

enum class KernelClass { isotropic, anisotropic, motion, custom };

inline const char* to_string(KernelClass c) {
  switch (c) {
    case KernelClass::isotropic: return "isotropic";
    case KernelClass::anisotropic: return "anisotropic";
    case KernelClass::motion: return "motion";
    case KernelClass::custom: return "custom";
  }
  return "custom";
}

struct BenchKernel {
  std::string name;
  KernelClass kind = KernelClass::custom;
  Kernel kernel;
};

inline constexpr std::uint64_t kMotionSeeds[4] = {1101, 1202, 1303, 1404};

// Kernels I-XII: four isotropic Gaussians, four anisotropic Gaussians and four
// motion trajectories of increasing nonlinearity.
inline std::vector<BenchKernel> gen_test_kernels() {
  using std::numbers::pi;
  static const char* names[12] = {"I",   "II",  "III", "IV",  "V",  "VI",
                                  "VII", "VIII", "IX", "X",   "XI", "XII"};
  std::vector<BenchKernel> out;
  int i = 0;
  for (double s : {0.7, 1.2, 1.6, 2.0})
    out.push_back({names[i++], KernelClass::isotropic, gaussian_kernel(s, s, 0.0)});
  const double aniso[4][3] = {
      {4, 1, 0}, {4, 1, pi / 4}, {4, 1, pi / 2}, {3, 1.5, 3 * pi / 4}};
  for (const auto& a : aniso)
    out.push_back({names[i++], KernelClass::anisotropic,
                   gaussian_kernel(a[0], a[1], a[2])});
  const double nl[4] = {0.3, 0.5, 0.7, 0.9};
  for (int j = 0; j < 4; ++j)
    out.push_back({names[i++], KernelClass::motion,
                   motion_kernel(kMotionSeeds[j], nl[j])});
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct BenchRow {
  std::string config;  // empty for single-configuration reports
  std::string image;
  std::string kernel;
  double psnr_db = 0.0;
  double psnr_y_db = 0.0;
  double kernel_mse_e5 = 0.0;
  double runtime_s = 0.0;

  bool operator==(const BenchRow&) const = default;
};

// Means over a group of rows. `group` is "kernel:<name>", "class:<name>" or
// "all".
struct BenchAggregate {
  std::string config;
  std::string group;
  int rows = 0;
  double psnr_db = 0.0;
  double psnr_y_db = 0.0;
  double kernel_mse_e5 = 0.0;
  double runtime_s = 0.0;

  bool operator==(const BenchAggregate&) const = default;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchAggregate> aggregates;

  bool operator==(const BenchReport&) const = default;

  // Mean of psnr_db over the rows of one configuration.
  double mean_psnr(const std::string& config = "") const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.config == config) sum += r.psnr_db, ++n;
    if (n == 0) throw invalid_input("bench: no rows for config '" + config + "'");
    return sum / n;
  }

  double mean_kernel_mse_e5(const std::string& config = "") const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.config == config) sum += r.kernel_mse_e5, ++n;
    if (n == 0) throw invalid_input("bench: no rows for config '" + config + "'");
    return sum / n;
  }
};

namespace detail {

inline BenchAggregate mean_of(const std::vector<const BenchRow*>& rows,
                              std::string config, std::string group) {
  BenchAggregate a{std::move(config), std::move(group)};
  for (const BenchRow* r : rows) {
    a.psnr_db += r->psnr_db;
    a.psnr_y_db += r->psnr_y_db;
    a.kernel_mse_e5 += r->kernel_mse_e5;
    a.runtime_s += r->runtime_s;
  }
  a.rows = static_cast<int>(rows.size());
  if (a.rows > 0) {
    a.psnr_db /= a.rows;
    a.psnr_y_db /= a.rows;
    a.kernel_mse_e5 /= a.rows;
    a.runtime_s /= a.rows;
  }
  return a;
}

}  // namespace detail

// Per-kernel, per-class and overall means for every configuration, in order
// of first appearance.
inline std::vector<BenchAggregate> aggregate_rows(
    const std::vector<BenchRow>& rows,
    const std::map<std::string, KernelClass>& classes) {
  std::vector<std::string> configs;
  for (const auto& r : rows)
    if (std::find(configs.begin(), configs.end(), r.config) == configs.end())
      configs.push_back(r.config);

  std::vector<BenchAggregate> out;
  for (const auto& cfg : configs) {
    std::vector<std::string> kernels;
    std::vector<const BenchRow*> all;
    for (const auto& r : rows) {
      if (r.config != cfg) continue;
      all.push_back(&r);
      if (std::find(kernels.begin(), kernels.end(), r.kernel) == kernels.end())
        kernels.push_back(r.kernel);
    }
    for (const auto& k : kernels) {
      std::vector<const BenchRow*> sel;
      for (const BenchRow* r : all)
        if (r->kernel == k) sel.push_back(r);
      out.push_back(detail::mean_of(sel, cfg, "kernel:" + k));
    }
    for (KernelClass c : {KernelClass::isotropic, KernelClass::anisotropic,
                          KernelClass::motion, KernelClass::custom}) {
      std::vector<const BenchRow*> sel;
      for (const BenchRow* r : all) {
        auto it = classes.find(r->kernel);
        const KernelClass rc = it == classes.end() ? KernelClass::custom : it->second;
        if (rc == c) sel.push_back(r);
      }
      if (!sel.empty())
        out.push_back(detail::mean_of(sel, cfg, std::string("class:") + to_string(c)));
    }
    out.push_back(detail::mean_of(all, cfg, "all"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV. Rows of an ablation report carry "<config>/" in front of the image
// name (and aggregates in front of the group); aggregates follow after one
// blank line. '/' cannot occur in a file name, so the split is unambiguous.

inline constexpr const char* kCsvHeader =
    "image,kernel,psnr_db,psnr_y_db,kernel_mse_e5,runtime_s";
inline constexpr const char* kCsvAggregateHeader =
    "aggregate,rows,psnr_db,psnr_y_db,kernel_mse_e5,runtime_s";

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string with_config(const std::string& config, const std::string& s) {
  return config.empty() ? s : config + "/" + s;
}

inline std::pair<std::string, std::string> split_config(const std::string& s) {
  const auto pos = s.find('/');
  if (pos == std::string::npos) return {"", s};
  return {s.substr(0, pos), s.substr(pos + 1)};
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw data_error("csv: bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw data_error("csv: bad number '" + s + "'");
  }
}

}  // namespace detail

inline std::string report_to_csv(const BenchReport& rep) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rep.rows) {
    if (r.image.find_first_of(",/") != std::string::npos ||
        r.kernel.find(',') != std::string::npos ||
        r.config.find_first_of(",/") != std::string::npos)
      throw invalid_input("csv: names must not contain ',' or '/'");
    out += detail::with_config(r.config, r.image) + "," + r.kernel + "," +
           detail::fmt_double(r.psnr_db) + "," + detail::fmt_double(r.psnr_y_db) +
           "," + detail::fmt_double(r.kernel_mse_e5) + "," +
           detail::fmt_double(r.runtime_s) + "\n";
  }
  out += "\n";
  out += std::string(kCsvAggregateHeader) + "\n";
  for (const auto& a : rep.aggregates)
    out += detail::with_config(a.config, a.group) + "," + std::to_string(a.rows) +
           "," + detail::fmt_double(a.psnr_db) + "," +
           detail::fmt_double(a.psnr_y_db) + "," +
           detail::fmt_double(a.kernel_mse_e5) + "," +
           detail::fmt_double(a.runtime_s) + "\n";
  return out;
}

inline BenchReport parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw data_error("csv: missing or wrong header");
  BenchReport rep;
  bool in_aggregates = false;
  bool blank_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) {
      if (blank_seen) throw data_error("csv: unexpected blank line");
      blank_seen = true;
      if (!std::getline(is, line) || line != kCsvAggregateHeader)
        throw data_error("csv: missing aggregate header");
      in_aggregates = true;
      continue;
    }
    const auto f = detail::split_fields(line);
    if (f.size() != 6) throw data_error("csv: expected 6 fields: " + line);
    auto [config, first] = detail::split_config(f[0]);
    if (!in_aggregates) {
      rep.rows.push_back({config, first, f[1], detail::parse_double(f[2]),
                          detail::parse_double(f[3]), detail::parse_double(f[4]),
                          detail::parse_double(f[5])});
    } else {
      BenchAggregate a{config, first};
      a.rows = static_cast<int>(detail::parse_double(f[1]));
      a.psnr_db = detail::parse_double(f[2]);
      a.psnr_y_db = detail::parse_double(f[3]);
      a.kernel_mse_e5 = detail::parse_double(f[4]);
      a.runtime_s = detail::parse_double(f[5]);
      rep.aggregates.push_back(std::move(a));
    }
  }
  return rep;
}

inline void write_report_csv(const BenchReport& rep,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open for writing: " + path.string());
  out << report_to_csv(rep);
  if (!out) throw data_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Evaluation

struct NamedImage {
  std::string name;
  Image image;
};

struct BenchOptions {
  int jobs = 1;
  // Supply the true kernel and noise level instead of estimating them.
  bool non_blind = false;
  std::string config;
};

// FNV-1a over (file name, kernel index, bit pattern of sigma).
inline std::uint64_t pair_seed(const std::string& image, int kernel_index,
                               double sigma) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (char c : image) mix(static_cast<std::uint8_t>(c));
  mix(0);
  for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(kernel_index >> (8 * i)));
  const auto bits = std::bit_cast<std::uint64_t>(sigma);
  for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(bits >> (8 * i)));
  return h;
}

// Largest centred window whose sides are multiples of m.
inline Image center_crop_to_multiple(const Image& img, int m) {
  const int h = img.height() / m * m, w = img.width() / m * m;
  if (h == 0 || w == 0) throw invalid_input("bench: image smaller than crop unit");
  if (h == img.height() && w == img.width()) return img;
  const int oy = (img.height() - h) / 2, ox = (img.width() - w) / 2;
  Image out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(c, i, j) = img.at(c, i + oy, j + ox);
  return out;
}

inline std::vector<NamedImage> load_hr_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw data_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") files.push_back(e.path());
  }
  if (files.empty()) throw data_error("no PNG images in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) out.push_back({f.filename().string(), read_png(f)});
  return out;
}

inline BenchReport evaluate_images(const std::vector<NamedImage>& images,
                                   const SolverConfig& cfg,
                                   const std::vector<BenchKernel>& kernels,
                                   double sigma, const BenchOptions& opt = {}) {
  if (images.empty()) throw invalid_input("bench: no images");
  if (kernels.empty()) throw invalid_input("bench: no kernels");
  cfg.validate();
  const int s = cfg.scale;

  std::vector<Image> hr;
  for (const auto& im : images) hr.push_back(center_crop_to_multiple(im.image, s * 8));

  const std::size_t nk = kernels.size();
  const std::size_t total = images.size() * nk;
  std::vector<BenchRow> rows(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t idx; (idx = next.fetch_add(1)) < total;) {
      const std::size_t ii = idx / nk, ki = idx % nk;
      try {
        const Image& x = hr[ii];
        const BenchKernel& bk = kernels[ki];
        DegradationConfig dc;
        dc.scale = s;
        dc.noise_sigma = sigma;
        dc.allow_high_noise = true;
        dc.rng_seed = pair_seed(images[ii].name, static_cast<int>(ki), sigma);
        const Image y = degrade(x, bk.kernel, dc);

        const auto t0 = std::chrono::steady_clock::now();
        SolverConfig run_cfg = cfg;
        run_cfg.keep_snapshots = false;
        const SolverResult res = opt.non_blind
                                     ? run_nonblind_full(y, bk.kernel, sigma, run_cfg)
                                     : run_ikr(y, run_cfg);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        BenchRow& r = rows[idx];
        r.config = opt.config;
        r.image = images[ii].name;
        r.kernel = bk.name;
        r.psnr_db = psnr(res.x, x);
        r.psnr_y_db = x.channels() == 3 ? psnr_y(res.x, x) : r.psnr_db;
        r.kernel_mse_e5 = kernel_mse(res.k, bk.kernel) * 1e5;
        r.runtime_s = secs;
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(total)));
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<std::string, KernelClass> classes;
  for (const auto& k : kernels) classes[k.name] = k.kind;
  BenchReport rep;
  rep.rows = std::move(rows);
  rep.aggregates = aggregate_rows(rep.rows, classes);
  return rep;
}

inline BenchReport evaluate(const std::filesystem::path& hr_dir,
                            const SolverConfig& cfg,
                            const std::vector<BenchKernel>& kernels, double sigma,
                            const BenchOptions& opt = {}) {
  return evaluate_images(load_hr_dir(hr_dir), cfg, kernels, sigma, opt);
}

inline const char* to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::predicted: return "predicted";
    case NoiseMode::known: return "known";
    case NoiseMode::zero: return "zero";
    case NoiseMode::max: return "max";
  }
  return "predicted";
}

// Label of one ablation cell, e.g. "zero-8-off".
inline std::string ablation_label(NoiseMode mode, int iterations, bool refine) {
  return std::string(to_string(mode)) + "-" + std::to_string(iterations) +
         (refine ? "-on" : "-off");
}

// {noise modes} x {8, 16 iterations} x {kernel refinement on, off}; the known
// mode uses the true sigma.
inline BenchReport ablation_grid_images(const std::vector<NamedImage>& images,
                                        const SolverConfig& base,
                                        const std::vector<BenchKernel>& kernels,
                                        double sigma, int jobs = 1) {
  std::map<std::string, KernelClass> classes;
  for (const auto& k : kernels) classes[k.name] = k.kind;
  BenchReport all;
  for (NoiseMode mode : {NoiseMode::predicted, NoiseMode::known, NoiseMode::zero,
                         NoiseMode::max})
    for (int iters : {8, 16})
      for (bool refine : {true, false}) {
        SolverConfig cfg = base;
        cfg.noise_mode = mode;
        cfg.known_sigma = sigma;
        cfg.iterations = iters;
        cfg.use_kernel_refinement = refine;
        BenchOptions opt;
        opt.jobs = jobs;
        opt.config = ablation_label(mode, iters, refine);
        BenchReport rep = evaluate_images(images, cfg, kernels, sigma, opt);
        all.rows.insert(all.rows.end(), rep.rows.begin(), rep.rows.end());
      }
  all.aggregates = aggregate_rows(all.rows, classes);
  return all;
}

inline BenchReport ablation_grid(const std::filesystem::path& hr_dir,
                                 const SolverConfig& base,
                                 const std::vector<BenchKernel>& kernels,
                                 double sigma, int jobs = 1) {
  return ablation_grid_images(load_hr_dir(hr_dir), base, kernels, sigma, jobs);
}

}  // namespace ikr
