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

#include "seqpe/encoder.hpp"

#include <algorithm>

#include "seqpe/error.hpp"

namespace seqpe {

SeqPEEncoder::SeqPEEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.seq.validate();
  if (cfg_.layers == 0) throw Error(ErrorCode::kConfigInvalid, "encoder needs at least one layer");
  const auto b = static_cast<std::size_t>(cfg_.seq.base);
  const auto k = static_cast<std::size_t>(cfg_.seq.digits);
  const auto n = static_cast<std::size_t>(cfg_.seq.dims);
  tables_.T = normal_parameter({b + 1, cfg_.width}, rng);
  tables_.O = normal_parameter({k, cfg_.width}, rng);
  tables_.D = n == 1 ? Tensor::zeros({1, cfg_.width}) : normal_parameter({n, cfg_.width}, rng);
  for (std::size_t l = 0; l < cfg_.layers; ++l) blocks_.emplace_back(cfg_.width, cfg_.heads, rng);
}

Tensor SeqPEEncoder::embed_sequence(const DigitSequence& s) const {
  const std::size_t k = static_cast<std::size_t>(cfg_.seq.digits);
  if (s.tokens.size() != cfg_.seq.sequence_length())
    throw Error(ErrorCode::kBadToken, "digit sequence length " + std::to_string(s.tokens.size()));
  std::vector<long> t(s.tokens.size()), o(s.tokens.size()), d(s.tokens.size());
  for (std::size_t r = 0; r < s.tokens.size(); ++r) {
    if (s.tokens[r] < 0 || s.tokens[r] >= cfg_.seq.base)
      throw Error(ErrorCode::kBadToken, "token " + std::to_string(s.tokens[r]) + " outside base");
    t[r] = s.tokens[r];
    o[r] = static_cast<long>(r % k);
    d[r] = static_cast<long>(r / k);
  }
  return add(add(gather_rows(tables_.T, t), gather_rows(tables_.O, o)), gather_rows(tables_.D, d));
}

Tensor SeqPEEncoder::input_rows(std::span<const PositionIndex> ps) const {
  const std::size_t k = static_cast<std::size_t>(cfg_.seq.digits);
  const std::size_t len = cfg_.seq.sequence_length() + 1;
  std::vector<long> t(ps.size() * len), o(t.size()), d(t.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const DigitSequence s = to_digit_sequence(ps[i], cfg_.seq);
    for (std::size_t r = 0; r + 1 < len; ++r) {
      t[i * len + r] = s.tokens[r];
      o[i * len + r] = static_cast<long>(r % k);
      d[i * len + r] = static_cast<long>(r / k);
    }
    t[i * len + len - 1] = cfg_.seq.base;
    o[i * len + len - 1] = -1;
    d[i * len + len - 1] = -1;
  }
  Tensor u = add(gather_rows(tables_.T, t), gather_rows(tables_.O, o));
  if (cfg_.seq.dims > 1) u = add(u, gather_rows(tables_.D, d));
  return reshape(u, {ps.size(), len, cfg_.width});
}

Tensor SeqPEEncoder::hidden_states(std::span<const PositionIndex> ps, const Tensor* input_override) const {
  if (ps.empty()) throw Error(ErrorCode::kOutOfRange, "empty position batch");
  Tensor x = input_override != nullptr ? *input_override : input_rows(ps);
  AttentionInputs in;
  in.mode = AttentionMode::kNope;
  in.causal = true;
  for (const auto& block : blocks_) x = block(x, in);
  return x;
}

Tensor SeqPEEncoder::encode_position(const PositionIndex& p) const {
  return reshape(encode_batch(std::span<const PositionIndex>(&p, 1)), {cfg_.width});
}

Tensor SeqPEEncoder::encode_batch(std::span<const PositionIndex> ps) const {
  return select_row(hidden_states(ps), cfg_.seq.sequence_length());
}

void SeqPEEncoder::collect(ParameterList& out) const {
  out.push_back({"seqpe.T", tables_.T, false});
  out.push_back({"seqpe.O", tables_.O, false});
  if (cfg_.seq.dims > 1) out.push_back({"seqpe.D", tables_.D, false});
  for (std::size_t l = 0; l < blocks_.size(); ++l)
    blocks_[l].collect("seqpe.block" + std::to_string(l), out, false);
}

PositionTable::PositionTable(PosSeqConfig cfg, std::vector<long> limits, std::vector<PositionIndex> positions,
                             Tensor rows)
    : cfg_(cfg), limits_(std::move(limits)), positions_(std::move(positions)), rows_(std::move(rows)) {
  if (rows_.rank() != 2 || rows_.dim(0) != positions_.size())
    throw Error(ErrorCode::kShapeMismatch, "table rows do not match positions");
  for (std::size_t i = 0; i < positions_.size(); ++i) index_.emplace(positions_[i], i);
}

std::span<const double> PositionTable::lookup(const PositionIndex& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) throw Error(ErrorCode::kOutOfRange, "position " + p.str() + " not in table");
  const std::size_t d = rows_.dim(1);
  return rows_.data().subspan(it->second * d, d);
}

Tensor PositionTable::lookup_batch(std::span<const PositionIndex> ps) const {
  const std::size_t d = rows_.dim(1);
  std::vector<double> out;
  out.reserve(ps.size() * d);
  for (const auto& p : ps) {
    auto row = lookup(p);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor::from({ps.size(), d}, std::move(out));
}

Container PositionTable::to_container() const {
  Container c;
  c.metadata["kind"] = "position_table";
  c.metadata["format_version"] = kContainerFormatVersion;
  c.metadata["base"] = cfg_.base;
  c.metadata["digits"] = cfg_.digits;
  c.metadata["dims"] = cfg_.dims;
  c.metadata["limits"] = limits_;
  std::vector<double> coords;
  for (const auto& p : positions_)
    for (long v : p.coords) coords.push_back(static_cast<double>(v));
  c.arrays.push_back({"positions", {positions_.size(), static_cast<std::size_t>(cfg_.dims)}, std::move(coords)});
  c.arrays.push_back({"rows", rows_.shape(), std::vector<double>(rows_.data().begin(), rows_.data().end())});
  return c;
}

PositionTable PositionTable::from_container(const Container& c) {
  if (c.metadata.value("kind", "") != "position_table")
    throw Error(ErrorCode::kFormat, "container is not a position table");
  PosSeqConfig cfg{c.metadata.at("base").get<int>(), c.metadata.at("digits").get<int>(),
                   c.metadata.at("dims").get<int>()};
  const auto& pos = c.find("positions");
  const auto& rows = c.find("rows");
  const std::size_t n = static_cast<std::size_t>(cfg.dims);
  std::vector<PositionIndex> positions;
  for (std::size_t i = 0; i * n < pos.data.size(); ++i) {
    std::vector<long> coords(n);
    for (std::size_t j = 0; j < n; ++j) coords[j] = static_cast<long>(pos.data[i * n + j]);
    positions.emplace_back(std::move(coords));
  }
  return PositionTable(cfg, c.metadata.at("limits").get<std::vector<long>>(), std::move(positions),
                       Tensor::from(rows.shape, rows.data));
}

void PositionTable::save(const std::filesystem::path& path) const { write_container(path, to_container()); }

PositionTable PositionTable::load(const std::filesystem::path& path) { return from_container(read_container(path)); }

PositionTable precompute_table(const SeqPEEncoder& encoder, const TrainRegion& region, std::size_t chunk) {
  const auto& cfg = encoder.config().seq;
  if (region.limits.size() != static_cast<std::size_t>(cfg.dims))
    throw Error(ErrorCode::kDimMismatch, "region rank does not match encoder dims");
  for (long l : region.limits)
    if (l <= 0 || l > cfg.capacity()) throw Error(ErrorCode::kOutOfRange, "region exceeds b^k");
  NoGradGuard guard;
  auto positions = enumerate_region(region);
  const std::size_t d = encoder.width();
  std::vector<double> rows;
  rows.reserve(positions.size() * d);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t i = 0; i < positions.size(); i += chunk) {
    const std::size_t n = std::min(chunk, positions.size() - i);
    Tensor e = encoder.encode_batch(std::span<const PositionIndex>(positions.data() + i, n));
    rows.insert(rows.end(), e.data().begin(), e.data().end());
  }
  Tensor t = Tensor::from({positions.size(), d}, std::move(rows));
  return PositionTable(cfg, region.limits, std::move(positions), std::move(t));
}

}  // namespace seqpe
