#pragma once

#include <optional>
#include <random>
#include <string>

#include "ikr/nets/classical.hpp"
#include "ikr/nets/conv.hpp"
#include "ikr/nets/resunet.hpp"

// Learned modules of the iterative solver: image denoiser P ("p"), kernel
// regulariser Pk ("pk"), kernel initializer I ("i") and noise /
// hyper-parameter estimator F ("f"). Each binds to tensors under its prefix.

namespace ikr::nets {

inline const std::string kDenoiserPrefix = "p";
inline const std::string kKernelRegPrefix = "pk";
inline const std::string kInitializerPrefix = "i";
inline const std::string kNoiseEstPrefix = "f";

// ---------------------------------------------------------------------------
// P: ResUNet with a constant beta channel appended to the image.

inline Image resunet_forward(const Image& z, double beta, const ResUNet& net) {
  const auto& cfg = net.config();
  if (cfg.in_channels != z.channels() || cfg.out_channels != z.channels() ||
      !cfg.beta_channel)
    throw invalid_input("resunet_forward: network does not match image");
  FeatureMap in({static_cast<std::size_t>(z.channels() + 1),
                 static_cast<std::size_t>(z.height()),
                 static_cast<std::size_t>(z.width())});
  std::copy(z.data().begin(), z.data().end(), in.data().begin());
  std::fill(in.data().begin() + z.sample_count(), in.data().end(), beta);
  return to_image(net.forward(in));
}

inline Image resunet_forward(const Image& z, double beta,
                             const WeightStore& ws) {
  const ResUNet net(ws, kDenoiserPrefix,
                    ResUNetConfig::infer(ws, kDenoiserPrefix, true));
  return resunet_forward(z, beta, net);
}

// ---------------------------------------------------------------------------
// Pk: single-channel ResUNet on the 21x21 window, then projection onto valid
// kernels.

inline Kernel kernel_regularizer_forward(const KernelWindow& w,
                                         const ResUNet& net) {
  const auto& cfg = net.config();
  if (cfg.head_inputs() != 1 || cfg.out_channels != 1)
    throw invalid_input("kernel regulariser must map 1 channel to 1");
  FeatureMap in({1, kKernelSize, kKernelSize},
                std::vector<double>(w.coeffs().begin(), w.coeffs().end()));
  const FeatureMap out = net.forward(in);
  KernelWindow raw;
  std::copy(out.data().begin(), out.data().end(), raw.coeffs().begin());
  return project_to_kernel(raw);
}

inline Kernel kernel_regularizer_forward(const KernelWindow& w,
                                         const WeightStore& ws) {
  const ResUNet net(ws, kKernelRegPrefix,
                    ResUNetConfig::infer(ws, kKernelRegPrefix, false));
  return kernel_regularizer_forward(w, net);
}

// ---------------------------------------------------------------------------
// I: strided conv encoder -> global average pool -> latent -> MLP -> 441
// logits -> projection.
//
//   i.enc<j>   3x3 stride 2 + ReLU, widths[j-1] -> widths[j] (input: 1 ch)
//   i.latent   3x3 stride 1, widths.back() -> latent
//   i.fc0      latent -> hidden, ReLU
//   i.fc1      hidden -> 441

struct InitializerConfig {
  std::vector<int> widths{32, 64};
  int latent = 10;
  int hidden = 128;

  static InitializerConfig infer(const WeightStore& ws) {
    InitializerConfig cfg;
    cfg.widths.clear();
    for (int j = 0; ws.contains("i.enc" + std::to_string(j) + ".weight"); ++j)
      cfg.widths.push_back(
          static_cast<int>(ws.get("i.enc" + std::to_string(j) + ".weight").dim(0)));
    if (cfg.widths.empty()) throw data_error("initializer: no encoder layers");
    cfg.latent = static_cast<int>(ws.get("i.latent.weight").dim(0));
    cfg.hidden = static_cast<int>(ws.get("i.fc0.weight").dim(0));
    return cfg;
  }
};

inline constexpr int kMinInitializerInput = 32;

class InitializerNet {
 public:
  InitializerNet(const WeightStore& ws, InitializerConfig cfg)
      : cfg_(std::move(cfg)) {
    int in = 1;
    for (std::size_t j = 0; j < cfg_.widths.size(); ++j) {
      enc_.push_back(ConvLayer::bind(ws, "i.enc" + std::to_string(j),
                                     ConvSpec{in, cfg_.widths[j], 2}));
      in = cfg_.widths[j];
    }
    latent_ = ConvLayer::bind(ws, "i.latent", ConvSpec{in, cfg_.latent, 1});
    fc0_w_ = &ws.get("i.fc0.weight", {std::size_t(cfg_.hidden), std::size_t(cfg_.latent)});
    fc0_b_ = &ws.get("i.fc0.bias", {std::size_t(cfg_.hidden)});
    fc1_w_ = &ws.get("i.fc1.weight", {std::size_t(kKernelTaps), std::size_t(cfg_.hidden)});
    fc1_b_ = &ws.get("i.fc1.bias", {std::size_t(kKernelTaps)});
  }

  const InitializerConfig& config() const { return cfg_; }

  // 10-dimensional (by default) latent code of an LR image.
  std::vector<double> encode(const Image& y) const {
    if (y.height() < kMinInitializerInput || y.width() < kMinInitializerInput)
      throw invalid_input("initializer: LR image must be at least 32x32");
    FeatureMap m = to_feature_map(channel_mean(y));
    for (const auto& l : enc_) m = relu(conv2d(m, l));
    m = conv2d(m, latent_);
    std::vector<double> code(m.dim(0), 0.0);
    const std::size_t plane = m.dim(1) * m.dim(2);
    for (std::size_t c = 0; c < code.size(); ++c) {
      for (std::size_t i = 0; i < plane; ++i) code[c] += m[c * plane + i];
      code[c] /= plane;
    }
    return code;
  }

  Kernel forward(const Image& y) const {
    auto h = linear(encode(y), *fc0_w_, *fc0_b_);
    for (double& v : h) v = std::max(v, 0.0);
    const auto logits = linear(h, *fc1_w_, *fc1_b_);
    KernelWindow raw;
    std::copy(logits.begin(), logits.end(), raw.coeffs().begin());
    return project_to_kernel(raw, default_initial_kernel());
  }

 private:
  InitializerConfig cfg_;
  std::vector<ConvLayer> enc_;
  ConvLayer latent_;
  const Tensor* fc0_w_ = nullptr;
  const Tensor* fc0_b_ = nullptr;
  const Tensor* fc1_w_ = nullptr;
  const Tensor* fc1_b_ = nullptr;
};

// Without weights the initializer returns an isotropic Gaussian, sigma 1.
inline Kernel initializer_forward(const Image& y, const WeightStore* ws) {
  if (!ws || !ws->has_prefix(kInitializerPrefix + ".")) {
    if (y.height() < kMinInitializerInput || y.width() < kMinInitializerInput)
      throw invalid_input("initializer: LR image must be at least 32x32");
    return default_initial_kernel();
  }
  return InitializerNet(*ws, InitializerConfig::infer(*ws)).forward(y);
}

// ---------------------------------------------------------------------------
// F: residual -> 2-layer conv -> spatial mean = sigma; (sigma, s) -> 3-layer
// MLP -> (alpha, beta).
//
//   f.conv0   1 -> hidden_conv, ReLU
//   f.conv1   hidden_conv -> 1
//   f.fc0     2 -> hidden_fc, ReLU
//   f.fc1     hidden_fc -> hidden_fc, ReLU
//   f.fc2     hidden_fc -> 2   (softplus; alpha floored at 1e-6)

struct NoiseEstimatorConfig {
  int hidden_conv = 16;
  int hidden_fc = 32;

  static NoiseEstimatorConfig infer(const WeightStore& ws) {
    return {static_cast<int>(ws.get("f.conv0.weight").dim(0)),
            static_cast<int>(ws.get("f.fc0.weight").dim(0))};
  }
};

class NoiseEstimatorNet {
 public:
  NoiseEstimatorNet(const WeightStore& ws, NoiseEstimatorConfig cfg)
      : cfg_(cfg) {
    conv0_ = ConvLayer::bind(ws, "f.conv0", ConvSpec{1, cfg_.hidden_conv});
    conv1_ = ConvLayer::bind(ws, "f.conv1", ConvSpec{cfg_.hidden_conv, 1});
    const auto hf = static_cast<std::size_t>(cfg_.hidden_fc);
    fc_[0] = {&ws.get("f.fc0.weight", {hf, 2}), &ws.get("f.fc0.bias", {hf})};
    fc_[1] = {&ws.get("f.fc1.weight", {hf, hf}), &ws.get("f.fc1.bias", {hf})};
    fc_[2] = {&ws.get("f.fc2.weight", {2, hf}), &ws.get("f.fc2.bias", {2})};
  }

  double estimate_sigma(const Image& residual) const {
    FeatureMap m = to_feature_map(channel_mean(residual));
    m = conv2d(relu(conv2d(m, conv0_)), conv1_);
    double mean = 0.0;
    for (double v : m.data()) mean += v;
    mean /= static_cast<double>(m.size());
    return std::max(mean, 0.0);
  }

  NoiseEstimate hyper_params(double sigma, int scale) const {
    std::vector<double> h{sigma, static_cast<double>(scale)};
    for (int l = 0; l < 3; ++l) {
      h = linear(h, *fc_[l].first, *fc_[l].second);
      if (l < 2)
        for (double& v : h) v = std::max(v, 0.0);
    }
    return {sigma, std::max(softplus(h[0]), kAlphaFloor), softplus(h[1])};
  }

 private:
  NoiseEstimatorConfig cfg_;
  ConvLayer conv0_, conv1_;
  std::pair<const Tensor*, const Tensor*> fc_[3];
};

// Noise level and hyper-parameters from the current reconstruction. Uses the
// learned estimator when `ws` holds "f.*" tensors, otherwise the sample
// standard deviation of the residual.
inline NoiseEstimate noise_estimate(const Image& y, const Image& x_prev,
                                    const KernelWindow& k, int s,
                                    const WeightStore* ws = nullptr) {
  if (!ws || !ws->has_prefix(kNoiseEstPrefix + "."))
    return classical_noise_estimate(y, x_prev, k, s);
  const NoiseEstimatorNet net(*ws, NoiseEstimatorConfig::infer(*ws));
  const Image r = reconstruction_residual(y, x_prev, k, s);
  return net.hyper_params(net.estimate_sigma(r), s);
}

// ---------------------------------------------------------------------------
// Random weights for the small modules (tests and smoke runs).

namespace detail {

inline void put_random(WeightStore& ws, const std::string& name,
                       std::vector<std::size_t> dims, std::mt19937_64& rng,
                       double stddev) {
  std::normal_distribution<float> n(0.0f, static_cast<float>(stddev));
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = n(rng);
  ws.insert(name, std::move(t));
}

}  // namespace detail

inline WeightStore random_initializer_weights(const InitializerConfig& cfg,
                                              std::uint64_t seed,
                                              double stddev = 0.1) {
  std::mt19937_64 rng(seed);
  WeightStore ws;
  std::size_t in = 1;
  for (std::size_t j = 0; j < cfg.widths.size(); ++j) {
    const auto out = static_cast<std::size_t>(cfg.widths[j]);
    const std::string n = "i.enc" + std::to_string(j);
    detail::put_random(ws, n + ".weight", {out, in, 3, 3}, rng, stddev);
    detail::put_random(ws, n + ".bias", {out}, rng, stddev);
    in = out;
  }
  const auto lat = static_cast<std::size_t>(cfg.latent);
  const auto hid = static_cast<std::size_t>(cfg.hidden);
  detail::put_random(ws, "i.latent.weight", {lat, in, 3, 3}, rng, stddev);
  detail::put_random(ws, "i.latent.bias", {lat}, rng, stddev);
  detail::put_random(ws, "i.fc0.weight", {hid, lat}, rng, stddev);
  detail::put_random(ws, "i.fc0.bias", {hid}, rng, stddev);
  detail::put_random(ws, "i.fc1.weight", {std::size_t(kKernelTaps), hid}, rng,
                     stddev);
  detail::put_random(ws, "i.fc1.bias", {std::size_t(kKernelTaps)}, rng, stddev);
  return ws;
}

inline WeightStore random_noise_estimator_weights(
    const NoiseEstimatorConfig& cfg, std::uint64_t seed, double stddev = 0.1) {
  std::mt19937_64 rng(seed);
  WeightStore ws;
  const auto hc = static_cast<std::size_t>(cfg.hidden_conv);
  const auto hf = static_cast<std::size_t>(cfg.hidden_fc);
  detail::put_random(ws, "f.conv0.weight", {hc, 1, 3, 3}, rng, stddev);
  detail::put_random(ws, "f.conv0.bias", {hc}, rng, stddev);
  detail::put_random(ws, "f.conv1.weight", {1, hc, 3, 3}, rng, stddev);
  detail::put_random(ws, "f.conv1.bias", {1}, rng, stddev);
  detail::put_random(ws, "f.fc0.weight", {hf, 2}, rng, stddev);
  detail::put_random(ws, "f.fc0.bias", {hf}, rng, stddev);
  detail::put_random(ws, "f.fc1.weight", {hf, hf}, rng, stddev);
  detail::put_random(ws, "f.fc1.bias", {hf}, rng, stddev);
  detail::put_random(ws, "f.fc2.weight", {2, hf}, rng, stddev);
  detail::put_random(ws, "f.fc2.bias", {2}, rng, stddev);
  return ws;
}

}  // namespace ikr::nets
