// ikr: degradation, blind super-resolution, benchmarking and solver checks.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ikr/ikr.hpp"
#include "ikr/oracle_check.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Shifts block_avg by one percent; used as a negative control for the
// oracle comparison.
struct CorruptedBlockOps {
  static ikr::ComplexGrid block_mul(const ikr::ComplexGrid& spec,
                                    const ikr::ComplexGrid& f, int s) {
    return ikr::SpectralBlockOps::block_mul(spec, f, s);
  }
  static ikr::ComplexGrid block_avg(const ikr::ComplexGrid& spec, int s) {
    auto out = ikr::SpectralBlockOps::block_avg(spec, s);
    for (auto& c : out.data()) c *= 1.01;
    return out;
  }
};

fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

std::shared_ptr<const ikr::WeightStore> load_weights_opt(const std::string& dir) {
  if (dir.empty()) return nullptr;
  return std::make_shared<const ikr::WeightStore>(ikr::load_weight_dir(dir));
}

// "predicted" | "zero" | "max" | "known:<sigma>"
std::string check_noise(const std::string& v) {
  if (v == "predicted" || v == "zero" || v == "max") return {};
  if (v.rfind("known:", 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string num = v.substr(6);
      const double s = std::stod(num, &used);
      if (used == num.size() && s >= 0.0 && s <= ikr::kMaxKnownSigma) return {};
    } catch (const std::exception&) {
    }
    return "known:<sigma> needs a number in [0, 0.05]";
  }
  return "expected predicted, zero, max or known:<sigma>";
}

void apply_noise(ikr::SolverConfig& cfg, const std::string& v) {
  if (v == "predicted") cfg.noise_mode = ikr::NoiseMode::predicted;
  else if (v == "zero") cfg.noise_mode = ikr::NoiseMode::zero;
  else if (v == "max") cfg.noise_mode = ikr::NoiseMode::max;
  else {
    cfg.noise_mode = ikr::NoiseMode::known;
    cfg.known_sigma = std::stod(v.substr(6));
  }
}

struct DegradeArgs {
  std::string input, output, kernel;
  std::vector<double> gauss;
  std::vector<double> motion;
  int scale = 2;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool allow_high_noise = false;
};

int run_degrade(const DegradeArgs& a) {
  const ikr::Image x = ikr::read_png(a.input);
  ikr::Kernel k = ikr::Kernel::delta();
  bool generated = true;
  if (!a.kernel.empty()) {
    k = ikr::load_kernel(a.kernel);
    generated = false;
  } else if (!a.gauss.empty()) {
    k = ikr::gaussian_kernel(a.gauss[0], a.gauss[1], a.gauss[2]);
  } else if (!a.motion.empty()) {
    if (a.motion[0] < 0 || a.motion[0] != std::floor(a.motion[0]))
      throw ikr::invalid_input("--motion seed must be a non-negative integer");
    k = ikr::motion_kernel(static_cast<std::uint64_t>(a.motion[0]), a.motion[1]);
  }
  ikr::DegradationConfig dc;
  dc.scale = a.scale;
  dc.noise_sigma = a.sigma;
  dc.rng_seed = a.seed;
  dc.allow_high_noise = a.allow_high_noise;
  const ikr::Image y = ikr::degrade(x, k, dc);
  ikr::write_png(y, a.output);
  if (generated) {
    const fs::path kf = sibling(a.output, ".kernel.txt");
    ikr::save_kernel(k.window(), kf);
    std::cout << "kernel: " << kf.string() << "\n";
  }
  std::cout << "wrote " << a.output << " (" << y.width() << "x" << y.height()
            << ")\n";
  return 0;
}

struct SrArgs {
  std::string input, output, weights, noise = "predicted", kernel, trace;
  int scale = 2;
  int iters = 16;
  double gamma = ikr::kDefaultGamma;
  bool no_refine = false;
  bool trace_images = false;
};

int run_sr(const SrArgs& a) {
  const ikr::Image y = ikr::read_png(a.input);
  ikr::SolverConfig cfg;
  cfg.scale = a.scale;
  cfg.iterations = a.iters;
  cfg.gamma = a.gamma;
  cfg.use_kernel_refinement = !a.no_refine;
  cfg.keep_snapshots = !a.trace.empty() && a.trace_images;
  apply_noise(cfg, a.noise);
  cfg.use_available_weights(load_weights_opt(a.weights));

  // A supplied kernel is held fixed; the noise mode still applies.
  if (!a.kernel.empty()) {
    cfg.use_kernel_refinement = false;
    cfg.initial_kernel = ikr::load_kernel(a.kernel);
  }
  const ikr::SolverResult res = ikr::run_ikr(y, cfg);

  ikr::write_png(res.x, a.output);
  ikr::save_kernel(res.k.window(), sibling(a.output, ".kernel.txt"));
  ikr::write_png(ikr::render_kernel(res.k.window()),
                 sibling(a.output, ".kernel.png"));
  if (!a.trace.empty()) ikr::write_trace_jsonl(res.trace, a.trace, a.trace_images);
  std::printf("wrote %s (%dx%d), sigma=%.6g\n", a.output.c_str(), res.x.width(),
              res.x.height(), res.sigma);
  return 0;
}

struct OracleArgs {
  int trials = 50;
  int max_size = 16;
  std::vector<int> scales{1, 2, 4};
  std::uint64_t seed = 0;
  bool corrupt = false;
};

int run_oracle(const OracleArgs& a) {
  ikr::OracleCheckConfig cfg;
  cfg.trials = a.trials;
  cfg.max_size = a.max_size;
  cfg.min_size = std::min(cfg.min_size, a.max_size);
  cfg.scales = a.scales;
  cfg.seed = a.seed;
  const ikr::OracleCheckResult r =
      a.corrupt ? ikr::run_oracle_check<CorruptedBlockOps>(cfg)
                : ikr::run_oracle_check(cfg);
  std::printf("instances: %d\n", r.instances);
  std::printf("worst relative error: z %.3e, w %.3e (tolerance %.0e)\n", r.worst_z,
              r.worst_w, cfg.tolerance);
  std::printf("%s\n", r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : kExitRuntime;
}

struct BenchArgs {
  std::string hr_dir, report, weights, noise = "predicted";
  int scale = 2;
  int iters = 16;
  int jobs = 1;
  double sigma = 0.0;
  double gamma = ikr::kDefaultGamma;
  bool ablation = false;
  bool non_blind = false;
  bool no_refine = false;
};

int run_bench(const BenchArgs& a) {
  ikr::SolverConfig cfg;
  cfg.scale = a.scale;
  cfg.iterations = a.iters;
  cfg.gamma = a.gamma;
  cfg.use_kernel_refinement = !a.no_refine;
  apply_noise(cfg, a.noise);
  cfg.use_available_weights(load_weights_opt(a.weights));

  const auto images = ikr::load_hr_dir(a.hr_dir);
  const auto kernels = ikr::gen_test_kernels();
  ikr::BenchReport rep;
  if (a.ablation) {
    rep = ikr::ablation_grid_images(images, cfg, kernels, a.sigma, a.jobs);
  } else {
    ikr::BenchOptions opt;
    opt.jobs = a.jobs;
    opt.non_blind = a.non_blind;
    rep = ikr::evaluate_images(images, cfg, kernels, a.sigma, opt);
  }
  ikr::write_report_csv(rep, a.report);
  for (const auto& ag : rep.aggregates)
    if (ag.group == "all" || ag.group.rfind("class:", 0) == 0)
      std::printf("%-18s %-18s psnr %.3f  psnr_y %.3f  kmse(e-5) %.3f\n",
                  ag.config.empty() ? "-" : ag.config.c_str(), ag.group.c_str(),
                  ag.psnr_db, ag.psnr_y_db, ag.kernel_mse_e5);
  std::printf("wrote %s (%zu rows)\n", a.report.c_str(), rep.rows.size());
  return 0;
}

// Kernels laid out 4 per row, magnified 4x, 4 px gaps.
ikr::Image contact_sheet(const std::vector<ikr::BenchKernel>& ks) {
  constexpr int kZoom = 4, kGap = 4, kPerRow = 4;
  const int tile = ikr::kKernelSize * kZoom;
  const int rows = (static_cast<int>(ks.size()) + kPerRow - 1) / kPerRow;
  ikr::Image sheet(kGap + rows * (tile + kGap), kGap + kPerRow * (tile + kGap), 1);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const ikr::Image k = ikr::render_kernel(ks[i].kernel.window());
    const int oy = kGap + static_cast<int>(i) / kPerRow * (tile + kGap);
    const int ox = kGap + static_cast<int>(i) % kPerRow * (tile + kGap);
    for (int r = 0; r < tile; ++r)
      for (int c = 0; c < tile; ++c)
        sheet.at(0, oy + r, ox + c) = k.at(0, r / kZoom, c / kZoom);
  }
  return sheet;
}

int run_kernels(const std::string& out) {
  fs::create_directories(out);
  const auto ks = ikr::gen_test_kernels();
  for (const auto& k : ks) {
    const fs::path p = fs::path(out) / ("kernel_" + k.name + ".txt");
    ikr::save_kernel(k.kernel.window(), p);
    std::printf("%s  %s\n", p.string().c_str(), ikr::to_string(k.kind));
  }
  const fs::path sheet = fs::path(out) / "kernels.png";
  ikr::write_png(contact_sheet(ks), sheet);
  std::printf("%s\n", sheet.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind super-resolution with iterative kernel reconstruction"};
  app.require_subcommand(1);
  app.allow_extras(false);

  const char* env_weights = std::getenv("IKR_WEIGHTS");
  const std::string default_weights = env_weights ? env_weights : "";

  DegradeArgs dg;
  auto* deg = app.add_subcommand("degrade", "Blur, decimate and add noise to an HR image");
  deg->add_option("--input", dg.input, "HR PNG")->required()->check(CLI::ExistingFile);
  deg->add_option("--output", dg.output, "LR PNG to write")->required();
  deg->add_option("--scale", dg.scale, "Decimation factor")->required()->check(CLI::Range(1, 8));
  auto* k_file = deg->add_option("--kernel", dg.kernel, "Kernel file (.txt or .ikrw)")
                     ->check(CLI::ExistingFile);
  auto* k_gauss = deg->add_option("--gauss", dg.gauss, "Gaussian kernel sx,sy,theta")
                      ->delimiter(',')
                      ->expected(3);
  auto* k_motion = deg->add_option("--motion", dg.motion, "Motion kernel seed,nonlinearity")
                       ->delimiter(',')
                       ->expected(2);
  k_file->excludes(k_gauss)->excludes(k_motion);
  k_gauss->excludes(k_motion);
  deg->add_option("--sigma", dg.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  deg->add_option("--seed", dg.seed, "Noise seed");
  deg->add_flag("--allow-high-noise", dg.allow_high_noise, "Permit sigma above 0.03");

  SrArgs sr;
  sr.weights = default_weights;
  auto* srs = app.add_subcommand("sr", "Reconstruct an HR image, kernel and noise level");
  srs->add_option("--input", sr.input, "LR PNG")->required()->check(CLI::ExistingFile);
  srs->add_option("--output", sr.output, "SR PNG to write")->required();
  srs->add_option("--scale", sr.scale, "Upscaling factor")->required()->check(CLI::Range(1, 4));
  srs->add_option("--weights", sr.weights, "Directory of .ikrw files (default $IKR_WEIGHTS)")
      ->check(CLI::ExistingDirectory);
  srs->add_option("--iters", sr.iters, "Iterations")->check(CLI::PositiveNumber);
  srs->add_option("--noise", sr.noise, "predicted | zero | max | known:<sigma>")
      ->check(CLI::Validator(check_noise, "NOISE"));
  srs->add_option("--gamma", sr.gamma, "Kernel-step regularisation")->check(CLI::PositiveNumber);
  srs->add_flag("--no-kernel-refine", sr.no_refine, "Keep the initial kernel");
  srs->add_option("--kernel", sr.kernel, "Known kernel: non-blind reconstruction")
      ->check(CLI::ExistingFile);
  auto* tr = srs->add_option("--trace", sr.trace, "Per-iteration JSONL trace");
  srs->add_flag("--trace-images", sr.trace_images, "Also write x_i and k_i PNGs")->needs(tr);

  OracleArgs oc;
  auto* orc = app.add_subcommand("oracle-check", "Compare FFT data steps with dense solves");
  orc->add_option("--trials", oc.trials, "Instances per scale")->check(CLI::PositiveNumber);
  orc->add_option("--max-size", oc.max_size, "Largest HR grid side")->check(CLI::Range(1, 32));
  orc->add_option("--scales", oc.scales, "Comma-separated scales")->delimiter(',');
  orc->add_option("--seed", oc.seed, "RNG seed");
  orc->add_flag("--corrupt-block-avg", oc.corrupt, "Negative control")->group("");

  BenchArgs bn;
  bn.weights = default_weights;
  auto* bench = app.add_subcommand("bench", "PSNR / kernel-MSE report over a directory of HR PNGs");
  bench->add_option("--hr-dir", bn.hr_dir, "Directory of HR PNGs")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--report", bn.report, "CSV to write")->required();
  bench->add_option("--scale", bn.scale, "Scale factor")->required()->check(CLI::Range(1, 4));
  bench->add_option("--sigma", bn.sigma, "Noise level of the degradation")->check(CLI::Range(0.0, 0.05));
  bench->add_option("--iters", bn.iters, "Iterations")->check(CLI::PositiveNumber);
  bench->add_option("--noise", bn.noise, "predicted | zero | max | known:<sigma>")
      ->check(CLI::Validator(check_noise, "NOISE"));
  bench->add_option("--gamma", bn.gamma, "Kernel-step regularisation")->check(CLI::PositiveNumber);
  bench->add_option("--weights", bn.weights, "Directory of .ikrw files (default $IKR_WEIGHTS)")
      ->check(CLI::ExistingDirectory);
  bench->add_option("--jobs", bn.jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_flag("--no-kernel-refine", bn.no_refine, "Keep the initial kernel");
  auto* abl = bench->add_flag("--ablation", bn.ablation, "Noise mode x iterations x refinement grid");
  bench->add_flag("--non-blind", bn.non_blind, "Supply true kernel and sigma")->excludes(abl);

  std::string kernels_out;
  auto* kern = app.add_subcommand("kernels", "Write the 12 test kernels and a contact sheet");
  kern->add_option("--out", kernels_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*deg) {
      if (dg.kernel.empty() && dg.gauss.empty() && dg.motion.empty()) {
        std::cerr << "degrade: one of --kernel, --gauss, --motion is required\n";
        return kExitUsage;
      }
      return run_degrade(dg);
    }
    if (*srs) return run_sr(sr);
    if (*orc) return run_oracle(oc);
    if (*bench) return run_bench(bn);
    if (*kern) return run_kernels(kernels_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
