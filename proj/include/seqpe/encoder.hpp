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

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seqpe/checkpoint.hpp"
#include "seqpe/integration.hpp"
#include "seqpe/positions.hpp"

namespace seqpe {

struct EncoderConfig {
  PosSeqConfig seq;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
};

// Token table T ((b+1) x d, last row is [CLS]), slot table O (k x d) and
// dimension table D (n x d). For n = 1, D is a constant zero row.
struct SeqPETables {
  Tensor T;
  Tensor O;
  Tensor D;

  std::size_t rows() const { return T.dim(0) + O.dim(0) + D.dim(0); }
};

// Small causal transformer over the digit sequence of a position with a
// trailing [CLS] token whose final hidden state is the position embedding.
class SeqPEEncoder {
 public:
  SeqPEEncoder() = default;
  SeqPEEncoder(const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }
  const SeqPETables& tables() const { return tables_; }
  SeqPETables& mutable_tables() { return tables_; }
  std::size_t width() const { return cfg_.width; }
  // b + 1 + k + n, independent of how many positions are representable.
  std::size_t table_rows() const { return tables_.rows(); }

  // U[i*k + j] = T[s^i_j] + O[j] + D[i]. Throws BadToken.
  Tensor embed_sequence(const DigitSequence& s) const;
  // Throws OutOfRange for unrepresentable positions.
  Tensor encode_position(const PositionIndex& p) const;
  // [|ps|, d]; row r is bit-identical to encode_position(ps[r]).
  Tensor encode_batch(std::span<const PositionIndex> ps) const;
  // Hidden states of every row, [|ps|, n*k + 1, d]. Exposed for mask checks.
  Tensor hidden_states(std::span<const PositionIndex> ps, const Tensor* input_override = nullptr) const;
  // Input rows U with [CLS] appended, [|ps|, n*k + 1, d].
  Tensor input_rows(std::span<const PositionIndex> ps) const;

  // Names are prefixed "seqpe.". D is omitted when n = 1.
  void collect(ParameterList& out) const;

 private:
  EncoderConfig cfg_;
  SeqPETables tables_;
  std::vector<TransformerBlock> blocks_;
};

// Inference-time lookup from position to its encoder output.
class PositionTable {
 public:
  PositionTable() = default;
  PositionTable(PosSeqConfig cfg, std::vector<long> limits, std::vector<PositionIndex> positions, Tensor rows);

  std::size_t size() const { return positions_.size(); }
  const Tensor& rows() const { return rows_; }
  const std::vector<long>& limits() const { return limits_; }
  const PosSeqConfig& config() const { return cfg_; }
  bool contains(const PositionIndex& p) const { return index_.count(p) != 0; }
  // Throws OutOfRange on a miss.
  std::span<const double> lookup(const PositionIndex& p) const;
  // [|ps|, d] copy of the stored rows.
  Tensor lookup_batch(std::span<const PositionIndex> ps) const;

  Container to_container() const;
  static PositionTable from_container(const Container& c);
  void save(const std::filesystem::path& path) const;
  static PositionTable load(const std::filesystem::path& path);

 private:
  PosSeqConfig cfg_;
  std::vector<long> limits_;
  std::vector<PositionIndex> positions_;
  std::map<PositionIndex, std::size_t> index_;
  Tensor rows_;
};

// Encodes every position of the box [0, limits) in chunks. Encoding is
// row-independent, so chunking does not change any value.
PositionTable precompute_table(const SeqPEEncoder& encoder, const TrainRegion& region, std::size_t chunk = 256);

}  // namespace seqpe
