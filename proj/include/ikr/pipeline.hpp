#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ikr/fourier_solver.hpp"
#include "ikr/nets/modules.hpp"
#include "ikr/png_io.hpp"
#include "ikr/resample.hpp"

namespace ikr {

enum class NoiseMode { predicted, known, zero, max };

enum class PlugVariant { classical, learned };

inline constexpr double kMaxKnownSigma = 0.05;
inline constexpr int kMinLrSize = 32;

struct SolverConfig {
  int iterations = 16;
  int scale = 2;
  NoiseMode noise_mode = NoiseMode::predicted;
  double known_sigma = 0.0;  // used when noise_mode == known
  bool use_kernel_refinement = true;
  double gamma = kDefaultGamma;

  PlugVariant denoiser = PlugVariant::classical;
  PlugVariant kernel_regularizer = PlugVariant::classical;
  PlugVariant initializer = PlugVariant::classical;
  PlugVariant noise_estimator = PlugVariant::classical;
  // Required by any learned plug; tensors are looked up by module prefix.
  std::shared_ptr<const WeightStore> weights;

  // Skips the initializer when set.
  std::optional<Kernel> initial_kernel;
  // Per-iteration image / kernel snapshots. Scalars are always kept.
  bool keep_snapshots = true;

  void validate() const {
    if (iterations < 1) throw invalid_input("solver: iterations must be >= 1");
    if (scale < 1 || scale > 4) throw invalid_input("solver: scale must be 1..4");
    if (noise_mode == NoiseMode::known &&
        !(known_sigma >= 0.0 && known_sigma <= kMaxKnownSigma))
      throw invalid_input("solver: known sigma must lie in [0, 0.05]");
    if (!(gamma > 0.0)) throw invalid_input("solver: gamma must be > 0");
    const bool any_learned = denoiser == PlugVariant::learned ||
                             kernel_regularizer == PlugVariant::learned ||
                             initializer == PlugVariant::learned ||
                             noise_estimator == PlugVariant::learned;
    if (any_learned && !weights)
      throw invalid_input("solver: learned plug selected without weights");
  }

  // Selects the learned variant for every module whose tensors are present.
  void use_available_weights(std::shared_ptr<const WeightStore> ws) {
    weights = std::move(ws);
    if (!weights) return;
    auto pick = [&](const std::string& p) {
      return weights->has_prefix(p + ".") ? PlugVariant::learned
                                          : PlugVariant::classical;
    };
    denoiser = pick(nets::kDenoiserPrefix);
    kernel_regularizer = pick(nets::kKernelRegPrefix);
    initializer = pick(nets::kInitializerPrefix);
    noise_estimator = pick(nets::kNoiseEstPrefix);
  }
};

// Names of the sub-steps, in execution order within one iteration.
inline constexpr const char* kStepKernel = "kernel_step";
inline constexpr const char* kStepKernelReg = "kernel_regularization";
inline constexpr const char* kStepNoise = "noise_estimation";
inline constexpr const char* kStepImage = "image_step";
inline constexpr const char* kStepDenoise = "denoise";

struct TraceEntry {
  int iteration = 0;
  std::vector<std::string> steps;
  double sigma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  KernelWindow kernel;                 // k_i (always a valid kernel)
  std::optional<KernelWindow> w;       // kernel-step output before Pk
  std::optional<Image> z;              // image-step output
  std::optional<Image> x;              // denoiser output

  bool operator==(const TraceEntry&) const = default;
};

struct SolverTrace {
  KernelWindow initial_kernel;
  std::vector<TraceEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const SolverTrace&) const = default;
};

struct SolverResult {
  Image x;
  Kernel k;
  double sigma;
  SolverTrace trace;
};

namespace detail {

// Learned networks resolved once per run.
class Plugs {
 public:
  Plugs(const SolverConfig& cfg, int channels) : cfg_(cfg) {
    const WeightStore* ws = cfg.weights.get();
    using nets::ResUNet;
    using nets::ResUNetConfig;
    if (cfg.denoiser == PlugVariant::learned) {
      denoiser_.emplace(*ws, nets::kDenoiserPrefix,
                        ResUNetConfig::infer(*ws, nets::kDenoiserPrefix, true));
      if (denoiser_->config().in_channels != channels)
        throw invalid_input("denoiser weights expect a different channel count");
    }
    if (cfg.kernel_regularizer == PlugVariant::learned)
      kernel_reg_.emplace(*ws, nets::kKernelRegPrefix,
                          ResUNetConfig::infer(*ws, nets::kKernelRegPrefix, false));
    if (cfg.initializer == PlugVariant::learned)
      initializer_.emplace(*ws, nets::InitializerConfig::infer(*ws));
    if (cfg.noise_estimator == PlugVariant::learned)
      noise_.emplace(*ws, nets::NoiseEstimatorConfig::infer(*ws));
  }

  Kernel initial_kernel(const Image& y) const {
    if (cfg_.initial_kernel) return *cfg_.initial_kernel;
    if (initializer_) return initializer_->forward(y);
    return nets::default_initial_kernel();
  }

  Kernel regularize_kernel(const KernelWindow& w) const {
    if (kernel_reg_) return nets::kernel_regularizer_forward(w, *kernel_reg_);
    return nets::classical_kernel_regularizer(w);
  }

  nets::NoiseEstimate hyper_params(const Image& y, const Image& x_prev,
                                   const Kernel& k) const {
    double sigma = 0.0;
    switch (cfg_.noise_mode) {
      case NoiseMode::predicted: {
        const Image r =
            nets::reconstruction_residual(y, x_prev, k.window(), cfg_.scale);
        sigma = noise_ ? noise_->estimate_sigma(r) : nets::sample_std(r.data());
        break;
      }
      case NoiseMode::known:
        sigma = cfg_.known_sigma;
        break;
      case NoiseMode::zero:
        sigma = 0.0;
        break;
      case NoiseMode::max:
        sigma = kMaxNoiseSigma;
        break;
    }
    if (noise_) return noise_->hyper_params(sigma, cfg_.scale);
    return nets::classical_hyper_params(sigma);
  }

  Image denoise(const Image& z, double beta) const {
    if (denoiser_) return nets::resunet_forward(z, beta, *denoiser_);
    return nets::classical_denoiser(z, beta);
  }

 private:
  const SolverConfig& cfg_;
  std::optional<nets::ResUNet> denoiser_;
  std::optional<nets::ResUNet> kernel_reg_;
  std::optional<nets::InitializerNet> initializer_;
  std::optional<nets::NoiseEstimatorNet> noise_;
};

inline void check_input(const Image& y, const SolverConfig& cfg) {
  cfg.validate();
  if (y.height() < kMinLrSize || y.width() < kMinLrSize)
    throw invalid_input("solver: LR image must be at least 32x32");
}

}  // namespace detail

// Blind reconstruction. Each iteration runs, in order: kernel data step,
// kernel regularisation (both skipped without refinement), noise /
// hyper-parameter estimation, image data step, denoising. Noise estimation
// precedes the image step because the latter consumes alpha_i.
inline SolverResult run_ikr(const Image& y, const SolverConfig& cfg) {
  detail::check_input(y, cfg);
  const int s = cfg.scale;
  const detail::Plugs plugs(cfg, y.channels());

  Image x = bilinear_upscale(y, s);
  Kernel k = plugs.initial_kernel(y);
  SolverTrace trace;
  trace.initial_kernel = k.window();
  double sigma = 0.0;

  for (int i = 1; i <= cfg.iterations; ++i) {
    TraceEntry e;
    e.iteration = i;
    if (cfg.use_kernel_refinement) {
      const KernelWindow w = data_step_w(y, x, k, cfg.gamma, s);
      e.steps.emplace_back(kStepKernel);
      k = plugs.regularize_kernel(w);
      e.steps.emplace_back(kStepKernelReg);
      if (cfg.keep_snapshots) e.w = w;
    }
    const nets::NoiseEstimate est = plugs.hyper_params(y, x, k);
    e.steps.emplace_back(kStepNoise);
    const Image z = data_step_z(y, x, k, est.alpha, s);
    e.steps.emplace_back(kStepImage);
    x = plugs.denoise(z, est.beta);
    e.steps.emplace_back(kStepDenoise);

    sigma = est.sigma;
    e.sigma = est.sigma;
    e.alpha = est.alpha;
    e.beta = est.beta;
    e.kernel = k.window();
    if (cfg.keep_snapshots) {
      e.z = z;
      e.x = x;
    }
    trace.entries.push_back(std::move(e));
  }
  return {std::move(x), k, sigma, std::move(trace)};
}

// Kernel supplied and held fixed, noise level known.
inline SolverResult run_nonblind_full(const Image& y, const Kernel& k,
                                      double sigma, SolverConfig cfg) {
  cfg.use_kernel_refinement = false;
  cfg.initial_kernel = k;
  cfg.noise_mode = NoiseMode::known;
  cfg.known_sigma = sigma;
  return run_ikr(y, cfg);
}

inline Image run_nonblind(const Image& y, const Kernel& k, double sigma,
                          const SolverConfig& cfg) {
  return run_nonblind_full(y, k, sigma, cfg).x;
}

// Kernel refinement alone against a known HR reference: iterates the kernel
// data step and the kernel regulariser with x held at x_ref.
inline Kernel estimate_kernel_only(const Image& y, const Image& x_ref,
                                   const SolverConfig& cfg) {
  detail::check_input(y, cfg);
  const detail::Plugs plugs(cfg, y.channels());
  Kernel k = plugs.initial_kernel(y);
  for (int i = 0; i < cfg.iterations; ++i)
    k = plugs.regularize_kernel(data_step_w(y, x_ref, k, cfg.gamma, cfg.scale));
  return k;
}

// ---------------------------------------------------------------------------
// Trace export: one JSON object per line and iteration. With `write_images`,
// x_i and k_i are written as PNG side files next to the trace; kernel PNGs
// are scaled so the largest tap maps to white.

inline Image render_kernel(const KernelWindow& k) {
  double peak = 0.0;
  for (double c : k.coeffs()) peak = std::max(peak, c);
  Image img(kKernelSize, kKernelSize, 1);
  for (int r = 0; r < kKernelSize; ++r)
    for (int c = 0; c < kKernelSize; ++c)
      img.at(0, r, c) = peak > 0.0 ? std::max(k.at(r, c), 0.0) / peak : 0.0;
  return img;
}

inline void write_trace_jsonl(const SolverTrace& trace,
                              const std::filesystem::path& path,
                              bool write_images = false) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open for writing: " + path.string());
  const auto stem = path.parent_path() / path.stem();
  for (const auto& e : trace.entries) {
    nlohmann::json j;
    j["iteration"] = e.iteration;
    j["steps"] = e.steps;
    j["sigma"] = e.sigma;
    j["alpha"] = e.alpha;
    j["beta"] = e.beta;
    j["kernel"] = std::vector<double>(e.kernel.coeffs().begin(),
                                      e.kernel.coeffs().end());
    if (write_images) {
      char tag[32];
      std::snprintf(tag, sizeof tag, ".iter%02d", e.iteration);
      const auto kpng = std::filesystem::path(stem.string() + tag + ".k.png");
      write_png(render_kernel(e.kernel), kpng);
      j["k_png"] = kpng.filename().string();
      j["k_png_normalization"] = "max=1";
      if (e.x) {
        const auto xpng = std::filesystem::path(stem.string() + tag + ".x.png");
        write_png(*e.x, xpng);
        j["x_png"] = xpng.filename().string();
      }
    }
    out << j.dump() << '\n';
  }
  if (!out) throw data_error("write failed: " + path.string());
}

}  // namespace ikr
