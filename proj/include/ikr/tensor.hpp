#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ikr {

// Raised when inputs violate an operation's contract (shapes, ranges).
class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for I/O and data-format problems.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>{});
}

template <typename T>
bool all_finite(std::span<const T> v) {
  for (const T& x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// Dense row-major tensor. Used for network weights (float) and
// intermediate feature maps (double, laid out channel x height x width).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(std::vector<std::size_t> dims)
      : dims_(std::move(dims)), data_(detail::product(dims_), T{}) {}

  BasicTensor(std::vector<std::size_t> dims, std::vector<T> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    if (detail::product(dims_) != data_.size())
      throw invalid_input("tensor: product(dims) != data length");
    if (!detail::all_finite<T>(data_))
      throw invalid_input("tensor: non-finite value");
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 3-D accessors for C x H x W feature maps.
  T& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * dims_[1] + y) * dims_[2] + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * dims_[1] + y) * dims_[2] + x];
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using FeatureMap = BasicTensor<double>;

// Planar real-valued raster with 1 or 3 channels. Nominal range is [0, 1],
// but values outside it are allowed (unclipped noise, deconvolution
// overshoot); every sample must be finite.
class Image {
 public:
  Image() = default;

  Image(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels) {
    check_shape();
    data_.assign(sample_count(), fill);
  }

  Image(int height, int width, int channels, std::vector<double> data)
      : height_(height), width_(width), channels_(channels),
        data_(std::move(data)) {
    check_shape();
    if (data_.size() != sample_count())
      throw invalid_input("image: data length does not match dims");
    if (!detail::all_finite<double>(data_))
      throw invalid_input("image: non-finite sample");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t sample_count() const { return plane_size() * channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::span<const double> plane(int c) const {
    return std::span<const double>(data_).subspan(c * plane_size(),
                                                  plane_size());
  }
  std::span<double> plane(int c) {
    return std::span<double>(data_).subspan(c * plane_size(), plane_size());
  }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ &&
           channels_ == o.channels_;
  }

  bool operator==(const Image&) const = default;

 private:
  void check_shape() const {
    if (height_ < 1 || width_ < 1)
      throw invalid_input("image: height and width must be >= 1");
    if (channels_ != 1 && channels_ != 3)
      throw invalid_input("image: channels must be 1 or 3");
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Single-channel mean of all channels.
inline Image channel_mean(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  auto dst = out.plane(0);
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  for (double& v : dst) v /= img.channels();
  return out;
}

inline double dot(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw invalid_input("dot: shape mismatch");
  return std::inner_product(a.data().begin(), a.data().end(),
                            b.data().begin(), 0.0);
}

inline bool all_finite(const Image& img) {
  return detail::all_finite<double>(img.data());
}

}  // namespace ikr
