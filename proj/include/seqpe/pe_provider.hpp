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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqpe/baseline_pe.hpp"
#include "seqpe/encoder.hpp"
#include "seqpe/integration.hpp"

namespace seqpe {

enum class PeKind { kNope, kApeSin, kApeLearn, kRope, kRope2d, kAlibi, kSeqPE };

// Accepts nope, ape-sin, ape-learn, rope, rope2d, alibi, seqpe.
PeKind parse_pe_kind(std::string_view text);
std::string_view pe_kind_name(PeKind kind);

struct PeConfig {
  PeKind kind = PeKind::kSeqPE;
  // How SeqPE embeddings enter attention: kAttnSum, kAttnMul or kAttnBias.
  AttentionMode fusion = AttentionMode::kAttnBias;
  std::size_t width = 64;       // main-model width
  std::size_t heads = 4;        // main-model heads
  std::size_t model_layers = 2;
  bool causal = true;
  double rope_base = 1e4;
  // Training extent per dimension ({L_train} or {H, W}); sizes APE-Learn.
  std::vector<long> train_extent{64};
  // APE-Learn beyond its table: interpolate, or throw UnsupportedExtent.
  bool interpolate = true;
  bool share_projection = true;
  EncoderConfig encoder;
};

// Owns the parameters of one position-encoding method and turns a list of
// positions into the per-layer attention inputs of a model.
class PeProvider {
 public:
  // Positional state for one forward pass over `positions`.
  class Context {
   public:
    // Added to token/patch embeddings; undefined when the method has none.
    const Tensor& input_term() const { return input_; }
    AttentionInputs layer(std::size_t l) const;
    // SeqPE embeddings before projection; undefined for other methods.
    const Tensor& embeddings() const { return embeddings_; }

   private:
    friend class PeProvider;
    AttentionMode mode_ = AttentionMode::kNope;
    bool causal_ = true;
    Tensor input_;
    Tensor embeddings_;
    std::vector<Tensor> eq_, ek_;
    const RopeParams* rope_ = nullptr;
    std::vector<long> pos1_;
    std::vector<PositionIndex> posn_;
    Tensor bias_;
  };

  PeProvider() = default;
  PeProvider(const PeConfig& cfg, Rng& rng);

  const PeConfig& config() const { return cfg_; }
  PeKind kind() const { return cfg_.kind; }
  bool is_seqpe() const { return cfg_.kind == PeKind::kSeqPE; }
  const SeqPEEncoder& encoder() const { return encoder_; }
  const ApeLearnTable& ape_table() const { return ape_; }

  // `positions` are row-major over `extent` ({L} or {h, w}) plus any shift.
  // APE-Learn ignores the shift and is sized by `extent`.
  std::unique_ptr<Context> prepare(std::span<const PositionIndex> positions, std::span<const long> extent) const;

  // SeqPE embeddings are read from `table` instead of encoded when set.
  void set_table(std::shared_ptr<const PositionTable> table) { table_ = std::move(table); }
  const PositionTable* table() const { return table_.get(); }

  void collect(ParameterList& out) const;

 private:
  PeConfig cfg_;
  SeqPEEncoder encoder_;
  std::vector<PeProjection> projections_;
  ApeLearnTable ape_;
  RopeParams rope_;
  std::shared_ptr<const PositionTable> table_;
};

// Row-major positions of a {L} or {h, w} extent.
std::vector<PositionIndex> grid_positions(std::span<const long> extent);

}  // namespace seqpe
