#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "ikr/metrics.hpp"
#include "ikr/pipeline.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ikr;
using ikr::testing::random_image;
using ikr::testing::synthetic_image;

namespace {

nets::ResUNetConfig tiny_unet(int ch, bool beta) {
  nets::ResUNetConfig cfg;
  cfg.in_channels = ch;
  cfg.out_channels = ch;
  cfg.widths = {4, 4, 8, 8};
  cfg.res_blocks = 1;
  cfg.beta_channel = beta;
  return cfg;
}

std::shared_ptr<WeightStore> all_learned_weights(int ch) {
  auto ws = std::make_shared<WeightStore>();
  ws->merge(nets::identity_resunet_weights(tiny_unet(ch, true), "p"));
  ws->merge(nets::random_resunet_weights(tiny_unet(1, false), "pk", 2, 0.05));
  ws->merge(nets::random_initializer_weights({{8, 8}, 10, 16}, 3, 0.1));
  ws->merge(nets::random_noise_estimator_weights({4, 8}, 4, 0.3));
  return ws;
}

struct Scene {
  Image x, y;
  Kernel k;
};

Scene make_scene(int hr, int ch, std::uint64_t seed, double sigma, Kernel k) {
  Image x = synthetic_image(hr, hr, ch, seed);
  Image y = degrade(x, k, {.scale = 2, .noise_sigma = sigma, .rng_seed = seed});
  return {std::move(x), std::move(y), std::move(k)};
}

}  // namespace

TEST(Pipeline, IdentityChain) {
  const Image y = random_image(40, 36, 3, 1);
  SolverConfig cfg;
  cfg.scale = 1;
  for (int iters : {1, 4}) {
    cfg.iterations = iters;
    const Image x = run_nonblind(y, Kernel::delta(), 0.0, cfg);
    for (std::size_t i = 0; i < x.data().size(); ++i)
      ASSERT_NEAR(x.data()[i], y.data()[i], 1e-5);
  }
  // Same through a learned denoiser with pass-through weights.
  auto ws = std::make_shared<WeightStore>(nets::identity_resunet_weights(tiny_unet(3, true), "p"));
  cfg.use_available_weights(ws);
  ASSERT_EQ(cfg.denoiser, PlugVariant::learned);
  ASSERT_EQ(cfg.noise_estimator, PlugVariant::classical);
  const Image x = run_nonblind(y, Kernel::delta(), 0.0, cfg);
  for (std::size_t i = 0; i < x.data().size(); ++i)
    ASSERT_NEAR(x.data()[i], y.data()[i], 1e-5);
}

TEST(Pipeline, NonBlindBeatsBilinear) {
  const Scene sc = make_scene(128, 3, 2, 0.0, gaussian_kernel(1.6, 1.6, 0));
  SolverConfig cfg;
  cfg.iterations = 8;
  const Image x = run_nonblind(sc.y, sc.k, 0.0, cfg);
  EXPECT_GT(psnr(x, sc.x), psnr(bilinear_upscale(sc.y, 2), sc.x) + 1.0);
}

TEST(Pipeline, StepOrderAndInvariants) {
  const Scene sc = make_scene(96, 1, 3, 0.01, motion_kernel(3, 0.5));
  SolverConfig cfg;
  cfg.iterations = 5;
  const SolverResult res = run_ikr(sc.y, cfg);
  ASSERT_EQ(res.trace.size(), 5u);
  const std::vector<std::string> full{kStepKernel, kStepKernelReg, kStepNoise,
                                      kStepImage, kStepDenoise};
  for (int i = 0; i < 5; ++i) {
    const TraceEntry& e = res.trace.entries[i];
    EXPECT_EQ(e.iteration, i + 1);
    EXPECT_EQ(e.steps, full);
    EXPECT_TRUE(satisfies_kernel_invariants(e.kernel.coeffs(), 1e-9));
    EXPECT_TRUE(e.w && e.z && e.x);
    EXPECT_GE(e.alpha, nets::kAlphaFloor);
  }
  EXPECT_EQ(res.k.window(), res.trace.entries.back().kernel);
  EXPECT_EQ(res.trace.initial_kernel, nets::default_initial_kernel().window());

  cfg.use_kernel_refinement = false;
  cfg.keep_snapshots = false;
  const SolverResult fixed = run_ikr(sc.y, cfg);
  for (const auto& e : fixed.trace.entries) {
    EXPECT_EQ(e.steps, (std::vector<std::string>{kStepNoise, kStepImage, kStepDenoise}));
    EXPECT_EQ(e.kernel, fixed.trace.initial_kernel);
    EXPECT_FALSE(e.x.has_value());
  }
}

TEST(Pipeline, Deterministic) {
  const Scene sc = make_scene(64, 3, 4, 0.02, gaussian_kernel(3, 1.5, 2.3));
  SolverConfig cfg;
  cfg.iterations = 4;
  const SolverResult a = run_ikr(sc.y, cfg);
  const SolverResult b = run_ikr(sc.y, cfg);
  EXPECT_TRUE(a.trace == b.trace);
  EXPECT_EQ(a.x, b.x);

  cfg.use_available_weights(all_learned_weights(3));
  const SolverResult c = run_ikr(sc.y, cfg);
  const SolverResult d = run_ikr(sc.y, cfg);
  EXPECT_TRUE(c.trace == d.trace);
  for (const auto& e : c.trace.entries)
    EXPECT_TRUE(satisfies_kernel_invariants(e.kernel.coeffs(), 1e-9));
  EXPECT_TRUE(all_finite(c.x));
}

TEST(Pipeline, TraceJsonl) {
  const fs::path dir = fs::temp_directory_path() / "ikr_test_trace";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Scene sc = make_scene(64, 1, 5, 0.0, gaussian_kernel(1.2, 1.2, 0));
  SolverConfig cfg;
  cfg.iterations = 3;
  const SolverResult res = run_ikr(sc.y, cfg);
  write_trace_jsonl(res.trace, dir / "t.jsonl", true);

  std::ifstream in(dir / "t.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    EXPECT_EQ(j["iteration"].get<int>(), n);
    EXPECT_EQ(j["steps"].size(), 5u);
    EXPECT_EQ(j["kernel"].size(), std::size_t(kKernelTaps));
    EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), res.trace.entries[n - 1].alpha);
    EXPECT_TRUE(fs::exists(dir / j["k_png"].get<std::string>()));
    EXPECT_TRUE(fs::exists(dir / j["x_png"].get<std::string>()));
  }
  EXPECT_EQ(n, 3);
  EXPECT_THROW(write_trace_jsonl(res.trace, dir / "missing" / "t.jsonl"), data_error);
}

TEST(Pipeline, NoiseModes) {
  const Scene sc = make_scene(64, 1, 6, 0.02, gaussian_kernel(1.2, 1.2, 0));
  SolverConfig cfg;
  cfg.iterations = 2;
  cfg.noise_mode = NoiseMode::zero;
  for (const auto& e : run_ikr(sc.y, cfg).trace.entries) {
    EXPECT_EQ(e.sigma, 0.0);
    EXPECT_EQ(e.alpha, nets::kAlphaFloor);
  }
  cfg.noise_mode = NoiseMode::max;
  for (const auto& e : run_ikr(sc.y, cfg).trace.entries) EXPECT_EQ(e.sigma, kMaxNoiseSigma);
  cfg.noise_mode = NoiseMode::known;
  cfg.known_sigma = 0.015;
  for (const auto& e : run_ikr(sc.y, cfg).trace.entries) EXPECT_EQ(e.sigma, 0.015);
  cfg.noise_mode = NoiseMode::predicted;
  for (const auto& e : run_ikr(sc.y, cfg).trace.entries) EXPECT_GT(e.sigma, 0.01);
}

TEST(Pipeline, PredictedNoiseBeatsZeroOnNoisyInput) {
  const Scene sc = make_scene(128, 3, 7, 0.02, gaussian_kernel(1.6, 1.6, 0));
  SolverConfig cfg;
  const double pred = psnr(run_ikr(sc.y, cfg).x, sc.x);
  cfg.noise_mode = NoiseMode::zero;
  const double zero = psnr(run_ikr(sc.y, cfg).x, sc.x);
  EXPECT_GT(pred, zero);
}

TEST(Pipeline, KernelOnlyRecoversGaussian) {
  const Scene sc = make_scene(96, 3, 8, 0.0, gaussian_kernel(2.0, 2.0, 0));
  SolverConfig cfg;
  const Kernel k = estimate_kernel_only(sc.y, sc.x, cfg);
  EXPECT_LE(kernel_mse(k, sc.k), 1e-4);
  EXPECT_TRUE(satisfies_kernel_invariants(k.coeffs(), 1e-9));
}

TEST(Pipeline, Validation) {
  const Image small(31, 40, 1);
  SolverConfig cfg;
  EXPECT_THROW(run_ikr(small, cfg), invalid_input);
  const Image y(32, 32, 1, 0.5);
  cfg.iterations = 0;
  EXPECT_THROW(run_ikr(y, cfg), invalid_input);
  cfg = {};
  cfg.scale = 5;
  EXPECT_THROW(run_ikr(y, cfg), invalid_input);
  cfg = {};
  cfg.noise_mode = NoiseMode::known;
  cfg.known_sigma = 0.06;
  EXPECT_THROW(run_ikr(y, cfg), invalid_input);
  cfg = {};
  cfg.denoiser = PlugVariant::learned;
  EXPECT_THROW(run_ikr(y, cfg), invalid_input);
  cfg = {};
  cfg.use_available_weights(std::make_shared<WeightStore>(
      nets::identity_resunet_weights(tiny_unet(1, true), "p")));
  EXPECT_THROW(run_ikr(Image(32, 32, 3), cfg), invalid_input);
}

TEST(Pipeline, RenderKernel) {
  const Image img = render_kernel(gaussian_kernel(1.0, 1.0, 0).window());
  EXPECT_EQ(img.height(), kKernelSize);
  EXPECT_DOUBLE_EQ(img.at(0, kKernelCenter, kKernelCenter), 1.0);
  EXPECT_LT(img.at(0, 0, 0), 1e-6);
}
