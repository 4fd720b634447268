#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "ikr/tensor.hpp"

namespace ikr {

// Named float tensors. File layout (all integers little-endian):
//
//   "IKRW" | u32 version (=1) | u32 count
//   per tensor: u16 name_len | name bytes (UTF-8) | u8 rank
//               | u32 extent * rank | f32 data (row-major)
class WeightStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  bool contains(const std::string& name) const {
    return entries_.count(name) != 0;
  }

  const Tensor& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw data_error("weight store: missing tensor '" + name + "'");
    return it->second;
  }

  // Fetches a tensor and checks its extents.
  const Tensor& get(const std::string& name,
                    const std::vector<std::size_t>& dims) const {
    const Tensor& t = get(name);
    if (t.dims() != dims)
      throw data_error("weight store: tensor '" + name + "' has wrong shape");
    return t;
  }

  // Throws on duplicate names.
  void insert(std::string name, Tensor t) {
    if (name.size() > 0xFFFF)
      throw invalid_input("weight store: name too long");
    if (t.rank() > 0xFF) throw invalid_input("weight store: rank too large");
    auto [it, inserted] = entries_.emplace(std::move(name), std::move(t));
    if (!inserted)
      throw data_error("weight store: duplicate tensor '" + it->first + "'");
  }

  void insert_or_assign(std::string name, Tensor t) {
    entries_.insert_or_assign(std::move(name), std::move(t));
  }

  // Merges another store; duplicate names are an error.
  void merge(const WeightStore& other) {
    for (const auto& [name, t] : other.entries_) insert(name, t);
  }

  bool has_prefix(const std::string& prefix) const {
    auto it = entries_.lower_bound(prefix);
    return it != entries_.end() && it->first.starts_with(prefix);
  }

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const WeightStore&) const = default;

 private:
  std::map<std::string, Tensor> entries_;
};

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw data_error("weight file: truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_weights(const WeightStore& ws) {
  std::vector<std::uint8_t> out{'I', 'K', 'R', 'W'};
  detail::put_le<std::uint32_t>(out, WeightStore::kVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ws.size()));
  for (const auto& [name, t] : ws.entries()) {
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.dims()) {
      if (d > 0xFFFFFFFFu) throw invalid_input("weight store: extent too large");
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (float f : t.data())
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline WeightStore decode_weights(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), "IKRW", 4) != 0)
    throw data_error("weight file: bad magic");
  if (r.get<std::uint32_t>() != WeightStore::kVersion)
    throw data_error("weight file: unsupported version");
  const std::uint32_t count = r.get<std::uint32_t>();

  WeightStore ws;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = r.get<std::uint16_t>();
    auto name_bytes = r.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = r.get<std::uint8_t>();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>();
    const std::size_t n_values = detail::product(dims);
    if (n_values > r.remaining() / sizeof(float))
      throw data_error("weight file: truncated");
    std::vector<float> data(n_values);
    for (float& f : data) f = std::bit_cast<float>(r.get<std::uint32_t>());
    if (!detail::all_finite<float>(data))
      throw data_error("weight file: non-finite value in '" + name + "'");
    ws.insert(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (!r.at_end()) throw data_error("weight file: trailing bytes");
  return ws;
}

inline void save_weights(const WeightStore& ws,
                         const std::filesystem::path& path) {
  const auto bytes = encode_weights(ws);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw data_error("write failed: " + path.string());
}

inline WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

// Loads and merges every *.ikrw file in a directory (sorted by name).
inline WeightStore load_weight_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw data_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ikrw")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  WeightStore ws;
  for (const auto& p : files) ws.merge(load_weights(p));
  return ws;
}

}  // namespace ikr
