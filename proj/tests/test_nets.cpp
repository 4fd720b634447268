#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ikr/degradation.hpp"
#include "ikr/nets/classical.hpp"
#include "ikr/nets/conv.hpp"
#include "ikr/nets/modules.hpp"
#include "ikr/nets/resunet.hpp"
#include "support/synthetic.hpp"

using namespace ikr;
using namespace ikr::nets;
using ikr::testing::random_image;
using ikr::testing::synthetic_image;

namespace {

FeatureMap random_map(std::mt19937_64& rng, int c, int h, int w) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap m({std::size_t(c), std::size_t(h), std::size_t(w)});
  for (double& v : m.data()) v = u(rng);
  return m;
}

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> dims) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = u(rng);
  return t;
}

// Direct gather form of a strided, zero-padded 3x3 cross-correlation.
FeatureMap naive_conv(const FeatureMap& in, const Tensor& w, const Tensor* b,
                      int cout, int stride) {
  const int cin = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const int ho = (h - 1) / stride + 1, wo = (wd - 1) / stride + 1;
  FeatureMap out({std::size_t(cout), std::size_t(ho), std::size_t(wo)});
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = b ? (*b)[o] : 0.0;
        for (int i = 0; i < cin; ++i)
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx) {
              const int iy = stride * y + ky, ix = stride * x + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += w[((o * cin + i) * 3 + ky + 1) * 3 + kx + 1] * in.at(i, iy, ix);
            }
        out.at(o, y, x) = acc;
      }
  return out;
}

double inner(const FeatureMap& a, const FeatureMap& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const FeatureMap& a, const FeatureMap& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ResUNetConfig small_config(int in, int out, bool beta) {
  ResUNetConfig cfg;
  cfg.in_channels = in;
  cfg.out_channels = out;
  cfg.widths = {4, 8, 8, 16};
  cfg.res_blocks = 1;
  cfg.beta_channel = beta;
  return cfg;
}

double variance(std::span<const double> v) {
  double m = 0.0, s = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s += (x - m) * (x - m);
  return s / v.size();
}

}  // namespace

TEST(Conv2d, MatchesNaiveGather) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(1, 4), dim(1, 9);
  for (int t = 0; t < 200; ++t) {
    const ConvSpec spec{ch(rng), ch(rng), 1 + t % 2, false, t % 3 != 0};
    const FeatureMap in = random_map(rng, spec.in_channels, dim(rng), dim(rng));
    const Tensor w = random_tensor(rng, spec.weight_dims());
    const Tensor b = random_tensor(rng, spec.bias_dims());
    const Tensor* bp = spec.bias ? &b : nullptr;
    const FeatureMap got = conv2d(in, spec, w, bp);
    const FeatureMap want = naive_conv(in, w, bp, spec.out_channels, spec.stride);
    ASSERT_EQ(got.dims(), want.dims()) << t;
    EXPECT_LE(max_abs(got, want), 1e-6) << t;
  }
}

TEST(Conv2d, TransposeIsAdjointOfStridedConv) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> ch(1, 4), dim(1, 8);
  for (int t = 0; t < 100; ++t) {
    const int stride = 1 + t % 2;
    const ConvSpec tr{ch(rng), ch(rng), stride, true, false};
    const FeatureMap u = random_map(rng, tr.in_channels, dim(rng), dim(rng));
    const Tensor w = random_tensor(rng, tr.weight_dims());
    const FeatureMap tu = conv2d(u, tr, w);
    ASSERT_EQ(tu.dim(1), u.dim(1) * stride);

    // Same taps with in/out swapped, applied as a regular strided conv.
    Tensor wt({std::size_t(tr.in_channels), std::size_t(tr.out_channels), 3, 3});
    for (int o = 0; o < tr.out_channels; ++o)
      for (int i = 0; i < tr.in_channels; ++i)
        for (int k = 0; k < 9; ++k)
          wt[(i * tr.out_channels + o) * 9 + k] = w[(o * tr.in_channels + i) * 9 + k];
    const FeatureMap v = random_map(rng, tr.out_channels, tu.dim(1), tu.dim(2));
    const FeatureMap av = naive_conv(v, wt, nullptr, tr.in_channels, stride);
    ASSERT_EQ(av.dims(), u.dims());
    EXPECT_NEAR(inner(tu, v), inner(u, av), 1e-9);
  }
}

TEST(Conv2d, ShapesAndValidation) {
  std::mt19937_64 rng(3);
  const FeatureMap in = random_map(rng, 2, 8, 6);
  const ConvSpec down{2, 3, 2, false, true};
  const Tensor bias(down.bias_dims());
  const FeatureMap d = conv2d(in, down, Tensor(down.weight_dims()), &bias);
  EXPECT_EQ(d.dims(), (std::vector<std::size_t>{3, 4, 3}));
  const ConvSpec up{2, 3, 2, true, false};
  EXPECT_EQ(conv2d(in, up, Tensor(up.weight_dims())).dims(),
            (std::vector<std::size_t>{3, 16, 12}));
  EXPECT_THROW(conv2d(in, ConvSpec{3, 1, 1, false, false}, Tensor({1, 3, 3, 3})),
               invalid_input);
  EXPECT_THROW(conv2d(in, ConvSpec{2, 1, 3, false, false}, Tensor({1, 2, 3, 3})),
               invalid_input);
  EXPECT_THROW(conv2d(in, ConvSpec{2, 1, 1, false, true}, Tensor({1, 2, 3, 3})),
               invalid_input);
}

TEST(ResUNet, ShapeSweep) {
  const auto cfg = small_config(3, 3, true);
  const WeightStore ws = random_resunet_weights(cfg, "p", 4, 0.1);
  const ResUNet net(ws, "p", cfg);
  for (int h : {64, 96, 128, 50})
    for (int w : {64, 96, 128, 37}) {
      const Image z = random_image(h, w, 3, h * w);
      const Image out = resunet_forward(z, 0.1, net);
      EXPECT_EQ(out.height(), h);
      EXPECT_EQ(out.width(), w);
      EXPECT_EQ(out.channels(), 3);
    }
}

TEST(ResUNet, ConfigRoundTripsThroughStore) {
  ResUNetConfig cfg = small_config(1, 1, false);
  cfg.res_blocks = 2;
  const WeightStore ws = random_resunet_weights(cfg, "pk", 1, 0.1);
  const auto inferred = ResUNetConfig::infer(ws, "pk", false);
  EXPECT_EQ(inferred.widths, cfg.widths);
  EXPECT_EQ(inferred.res_blocks, 2);
  EXPECT_EQ(inferred.in_channels, 1);
  EXPECT_THROW(ResUNet(ws, "p", cfg), data_error);

  // Full-size default topology binds its own weights.
  const ResUNetConfig full;
  EXPECT_NO_THROW(ResUNet(zero_resunet_weights(full, "p"), "p", full));
}

TEST(ResUNet, IdentityWeights) {
  const auto cfg = small_config(3, 3, true);
  const WeightStore ws = identity_resunet_weights(cfg, "p");
  const Image z = random_image(40, 24, 3, 5);
  const Image out = resunet_forward(z, 0.3, ws);
  for (std::size_t i = 0; i < z.data().size(); ++i)
    EXPECT_NEAR(out.data()[i], z.data()[i], 1e-12);
}

TEST(ResUNet, BetaChannelIsWired) {
  const auto cfg = small_config(1, 1, true);
  WeightStore ws = random_resunet_weights(cfg, "p", 6, 0.2);
  const Image z = random_image(32, 32, 1, 6);
  const Image a = resunet_forward(z, 0.0, ws);
  const Image b = resunet_forward(z, 0.2, ws);
  EXPECT_NE(a, b);

  // With the beta input taps zeroed the output cannot depend on beta.
  Tensor head = ws.get("p.head.weight");
  for (std::size_t o = 0; o < head.dim(0); ++o)
    for (int k = 0; k < 9; ++k) head[(o * 2 + 1) * 9 + k] = 0.0f;
  ws.insert_or_assign("p.head.weight", std::move(head));
  EXPECT_EQ(resunet_forward(z, 0.0, ws), resunet_forward(z, 0.2, ws));
}

TEST(KernelRegularizer, OutputsValidKernels) {
  const auto cfg = small_config(1, 1, false);
  const WeightStore ws = random_resunet_weights(cfg, "pk", 7, 0.3);
  const ResUNet net(ws, "pk", cfg);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    KernelWindow w;
    for (double& c : w.coeffs()) c = n(rng);
    const Kernel k = kernel_regularizer_forward(w, net);
    ASSERT_TRUE(satisfies_kernel_invariants(k.coeffs(), 1e-9)) << t;
  }
  EXPECT_EQ(classical_kernel_regularizer(Kernel::delta().window()), Kernel::delta());
}

TEST(Initializer, FallbackAndLearned) {
  const Image y = random_image(40, 36, 3, 8);
  EXPECT_EQ(initializer_forward(y, nullptr), gaussian_kernel(1.0, 1.0, 0.0));
  EXPECT_THROW(initializer_forward(Image(16, 40, 1), nullptr), invalid_input);

  const WeightStore ws = random_initializer_weights(InitializerConfig{}, 8, 0.1);
  const InitializerNet net(ws, InitializerConfig::infer(ws));
  EXPECT_EQ(net.encode(y).size(), 10u);
  const Kernel k = initializer_forward(y, &ws);
  EXPECT_TRUE(satisfies_kernel_invariants(k.coeffs(), 1e-9));
  EXPECT_EQ(initializer_forward(y, &ws), k);
  EXPECT_THROW(initializer_forward(Image(31, 40, 1), &ws), invalid_input);
}

TEST(NoiseEstimator, LearnedOutputsArePositive) {
  const WeightStore ws = random_noise_estimator_weights(NoiseEstimatorConfig{}, 9, 0.5);
  const Image x = synthetic_image(64, 64, 3, 9);
  const Kernel k = gaussian_kernel(1.2, 1.2, 0);
  const Image y = degrade(x, k, {.scale = 2, .noise_sigma = 0.02, .rng_seed = 9});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightStore w = random_noise_estimator_weights({}, seed, 1.0);
    const NoiseEstimate e = noise_estimate(y, x, k.window(), 2, &w);
    EXPECT_GE(e.sigma, 0.0);
    EXPECT_GE(e.alpha, kAlphaFloor);
    EXPECT_GE(e.beta, 0.0);
  }
  // No "f.*" tensors: the classical estimate.
  const WeightStore other = random_initializer_weights({}, 1, 0.1);
  const NoiseEstimate a = noise_estimate(y, x, k.window(), 2, &other);
  const NoiseEstimate b = classical_noise_estimate(y, x, k.window(), 2);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.alpha, b.alpha);
  (void)ws;
}

TEST(ClassicalDenoiser, Basics) {
  const Image z = random_image(20, 16, 3, 10);
  EXPECT_EQ(classical_denoiser(z, 0.0), z);
  EXPECT_THROW(classical_denoiser(z, -0.1), invalid_input);

  const Image flat(12, 12, 3, 0.42);
  const Image flat_out = classical_denoiser(flat, 0.05);
  for (double v : flat_out.data()) EXPECT_NEAR(v, 0.42, 1e-12);

  const Image noisy = add_noise(Image(64, 64, 1, 0.5), 0.02, 10);
  const Image den = classical_denoiser(noisy, 0.02);
  EXPECT_LT(variance(den.data()), 0.5 * variance(noisy.data()));
}

TEST(ClassicalDenoiser, KeepsStrongEdges) {
  Image step(16, 16, 1);
  for (int i = 0; i < 16; ++i)
    for (int j = 8; j < 16; ++j) step.at(0, i, j) = 1.0;
  const Image out = classical_denoiser(step, 0.02);
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(out.at(0, i, 7), 0.0, 1e-6);
    EXPECT_NEAR(out.at(0, i, 8), 1.0, 1e-6);
  }
}

TEST(ClassicalNoiseEstimate, TracksTrueSigma) {
  const Image x = synthetic_image(256, 256, 3, 11);
  const Kernel k = gaussian_kernel(1.6, 1.6, 0);
  const Image y = degrade(x, k, {.scale = 2, .noise_sigma = 0.02, .rng_seed = 11});
  const NoiseEstimate e = classical_noise_estimate(y, x, k.window(), 2);
  EXPECT_GE(e.sigma, 0.018);
  EXPECT_LE(e.sigma, 0.022);
  EXPECT_DOUBLE_EQ(e.beta, e.sigma);
  EXPECT_DOUBLE_EQ(e.alpha, kAlphaGain * e.sigma * e.sigma);

  const Image clean = degrade(x, k, {.scale = 2});
  const NoiseEstimate z = classical_noise_estimate(clean, x, k.window(), 2);
  EXPECT_LT(z.sigma, 1e-8);
  EXPECT_EQ(z.alpha, kAlphaFloor);
}

TEST(ClassicalNoiseEstimate, ShiftInvariant) {
  const Image x = synthetic_image(64, 64, 1, 12);
  const Kernel k = motion_kernel(12, 0.5);
  const Image y = degrade(x, k, {.scale = 2, .noise_sigma = 0.01, .rng_seed = 12});
  Image xs = x, ys = y;
  for (double& v : xs.data()) v += 0.3;
  for (double& v : ys.data()) v += 0.3;
  EXPECT_NEAR(classical_noise_estimate(y, x, k.window(), 2).sigma,
              classical_noise_estimate(ys, xs, k.window(), 2).sigma, 1e-12);
}
