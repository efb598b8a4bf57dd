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

#include <span>
#include <vector>

#include "seqpe/grid2d.hpp"
#include "seqpe/pe_provider.hpp"
#include "seqpe/regularizers.hpp"

namespace seqpe {

struct TinyLMConfig {
  std::size_t vocab = 128;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  long train_length = 64;
  std::vector<long> eval_lengths{64, 128, 256};
  PeConfig pe;
  LossWeights weights;
};

using TokenBatch = std::vector<std::vector<int>>;

// Causal decoder: token embedding (+ input PE), pre-LN blocks, final LN,
// linear head over the vocabulary.
class TinyLM {
 public:
  TinyLM(const TinyLMConfig& cfg, Rng& rng);

  const TinyLMConfig& config() const { return cfg_; }
  PeProvider& pe() { return pe_; }
  const PeProvider& pe() const { return pe_; }
  std::vector<long> train_extent() const { return {cfg_.train_length}; }
  // Every sequence in a batch shares the same length.
  static std::vector<long> extent_of(const TokenBatch& batch);

  // [B * L, V] next-token logits for rows of equal length L at `positions`.
  Tensor logits(const TokenBatch& batch, std::span<const PositionIndex> positions) const;
  // Mean next-token cross-entropy over the B * (L - 1) predicted tokens.
  // With `training`, throws ContextTooLong when L exceeds the train length.
  Tensor main_loss(const TokenBatch& batch, std::span<const PositionIndex> positions, bool training) const;

  ParameterList parameters() const;
  // Test access to the output head.
  Linear& head() { return head_; }
  Tensor& token_embedding() { return tokens_; }

 private:
  TinyLMConfig cfg_;
  PeProvider pe_;
  Tensor tokens_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_norm_;
  Linear head_;
};

struct GridModelConfig {
  std::size_t feature_dim = 8;
  std::size_t classes = 4;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  long rows = 8;
  long cols = 8;
  std::vector<std::vector<long>> eval_grids{{8, 8}, {12, 12}};
  PeConfig pe;
  LossWeights weights;
};

struct GridBatch {
  long rows = 0;
  long cols = 0;
  std::vector<const GridSample*> samples;
};

// Patch projection (+ input PE), bidirectional pre-LN blocks, final LN,
// mean pool over cells, linear class head.
class GridModel {
 public:
  GridModel(const GridModelConfig& cfg, Rng& rng);

  const GridModelConfig& config() const { return cfg_; }
  PeProvider& pe() { return pe_; }
  const PeProvider& pe() const { return pe_; }
  std::vector<long> train_extent() const { return {cfg_.rows, cfg_.cols}; }
  static std::vector<long> extent_of(const GridBatch& batch) { return {batch.rows, batch.cols}; }

  // [B, classes].
  Tensor logits(const GridBatch& batch, std::span<const PositionIndex> positions) const;
  Tensor main_loss(const GridBatch& batch, std::span<const PositionIndex> positions, bool training) const;

  ParameterList parameters() const;
  Linear& head() { return head_; }

 private:
  GridModelConfig cfg_;
  PeProvider pe_;
  Linear patch_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_norm_;
  Linear head_;
};

GridBatch make_grid_batch(const GridDataset& ds, std::span<const std::size_t> indices);

}  // namespace seqpe
