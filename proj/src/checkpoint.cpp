// Copyright 2026 The SeqPE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqpe/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'P', 'E', 'C', 'K', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kFormat, "truncated container");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedArray& Container::find(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw Error(ErrorCode::kFormat, "container has no array named '" + std::string(name) + "'");
}

std::string encode_container(const Container& c) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kContainerFormatVersion);
  const std::string meta = c.metadata.dump();
  put_le<std::uint64_t>(out, meta.size());
  out += meta;
  put_le<std::uint64_t>(out, c.arrays.size());
  for (const auto& a : c.arrays) {
    if (shape_numel(a.shape) != a.data.size()) {
      throw Error(ErrorCode::kShapeMismatch, "array '" + a.name + "' shape does not match payload");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) put_le<std::uint64_t>(out, d);
    for (double v : a.data) put_le<double>(out, v);
  }
  return out;
}

Container decode_container(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kFormat, "bad container magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kContainerFormatVersion) {
    throw Error(ErrorCode::kFormat, "unsupported container version " + std::to_string(version));
  }
  Container c;
  const auto meta_len = r.get<std::uint64_t>();
  try {
    c.metadata = nlohmann::json::parse(r.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("container metadata: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const std::size_t n = shape_numel(a.shape);
    if (n > bytes.size() / 8) throw Error(ErrorCode::kFormat, "array '" + a.name + "' larger than file");
    a.data.resize(n);
    for (auto& v : a.data) v = r.get<double>();
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes after container");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

std::string config_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

Container snapshot_parameters(const ParameterList& params, nlohmann::json metadata, std::string_view config_text) {
  Container c;
  c.metadata = std::move(metadata);
  c.metadata["format_version"] = kContainerFormatVersion;
  c.metadata["config_hash"] = config_hash(config_text);
  for (const auto& p : params) {
    c.arrays.push_back({p.name, p.tensor.shape(), std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())});
  }
  return c;
}

void restore_parameters(const Container& c, const ParameterList& params) {
  for (const auto& p : params) {
    const NamedArray& a = c.find(p.name);
    if (a.shape != p.tensor.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint shape for '" + p.name + "' is " + shape_str(a.shape) +
                                                 ", model expects " + shape_str(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    std::copy(a.data.begin(), a.data.end(), t.mutable_data().begin());
  }
}

}  // namespace seqpe
