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

#include "seqpe/models.hpp"

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

PeConfig lm_pe_config(const TinyLMConfig& cfg) {
  PeConfig pe = cfg.pe;
  pe.width = cfg.width;
  pe.heads = cfg.heads;
  pe.model_layers = cfg.layers;
  pe.causal = true;
  pe.train_extent = {cfg.train_length};
  return pe;
}

PeConfig grid_pe_config(const GridModelConfig& cfg) {
  PeConfig pe = cfg.pe;
  pe.width = cfg.width;
  pe.heads = cfg.heads;
  pe.model_layers = cfg.layers;
  pe.causal = false;
  pe.train_extent = {cfg.rows, cfg.cols};
  return pe;
}

Tensor run_blocks(const std::vector<TransformerBlock>& blocks, Tensor x, const PeProvider::Context& ctx) {
  if (ctx.input_term().defined()) x = add(x, ctx.input_term());
  for (std::size_t l = 0; l < blocks.size(); ++l) x = blocks[l](x, ctx.layer(l));
  return x;
}

}  // namespace

TinyLM::TinyLM(const TinyLMConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.train_length < 2) throw Error(ErrorCode::kConfigInvalid, "train length must be >= 2");
  Rng pe_rng = rng.split(1);
  Rng body = rng.split(2);
  pe_ = PeProvider(lm_pe_config(cfg_), pe_rng);
  tokens_ = normal_parameter({cfg_.vocab, cfg_.width}, body);
  for (std::size_t l = 0; l < cfg_.layers; ++l) blocks_.emplace_back(cfg_.width, cfg_.heads, body);
  final_norm_ = LayerNorm(cfg_.width);
  head_ = Linear(cfg_.width, cfg_.vocab, body);
}

std::vector<long> TinyLM::extent_of(const TokenBatch& batch) {
  if (batch.empty() || batch[0].empty()) throw Error(ErrorCode::kEmptyCorpus, "empty token batch");
  for (const auto& row : batch)
    if (row.size() != batch[0].size()) throw Error(ErrorCode::kShapeMismatch, "ragged token batch");
  return {static_cast<long>(batch[0].size())};
}

Tensor TinyLM::logits(const TokenBatch& batch, std::span<const PositionIndex> positions) const {
  const std::vector<long> extent = extent_of(batch);
  const auto len = static_cast<std::size_t>(extent[0]);
  if (positions.size() != len) throw Error(ErrorCode::kShapeMismatch, "position count != sequence length");
  std::vector<long> ids;
  ids.reserve(batch.size() * len);
  for (const auto& row : batch)
    for (int t : row) {
      if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab)
        throw Error(ErrorCode::kBadToken, "token " + std::to_string(t) + " outside vocabulary");
      ids.push_back(t);
    }
  auto ctx = pe_.prepare(positions, extent);
  Tensor x = reshape(gather_rows(tokens_, ids), {batch.size(), len, cfg_.width});
  x = final_norm_(run_blocks(blocks_, x, *ctx));
  return head_(reshape(x, {batch.size() * len, cfg_.width}));
}

Tensor TinyLM::main_loss(const TokenBatch& batch, std::span<const PositionIndex> positions, bool training) const {
  const long len = extent_of(batch)[0];
  if (training && len > cfg_.train_length)
    throw Error(ErrorCode::kContextTooLong, "training length " + std::to_string(len) + " exceeds " +
                                                std::to_string(cfg_.train_length));
  if (len < 2) throw Error(ErrorCode::kOutOfRange, "need at least two tokens to predict");
  std::vector<int> targets;
  for (const auto& row : batch)
    for (std::size_t t = 0; t < row.size(); ++t) targets.push_back(t + 1 < row.size() ? row[t + 1] : -1);
  return cross_entropy(logits(batch, positions), targets);
}

ParameterList TinyLM::parameters() const {
  ParameterList out;
  pe_.collect(out);
  out.push_back({"lm.tokens", tokens_, true});
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect("lm.block" + std::to_string(l), out);
  final_norm_.collect("lm.final_norm", out);
  head_.collect("lm.head", out);
  return out;
}

GridModel::GridModel(const GridModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  Rng pe_rng = rng.split(1);
  Rng body = rng.split(2);
  pe_ = PeProvider(grid_pe_config(cfg_), pe_rng);
  patch_ = Linear(cfg_.feature_dim, cfg_.width, body);
  for (std::size_t l = 0; l < cfg_.layers; ++l) blocks_.emplace_back(cfg_.width, cfg_.heads, body);
  final_norm_ = LayerNorm(cfg_.width);
  head_ = Linear(cfg_.width, cfg_.classes, body);
}

Tensor GridModel::logits(const GridBatch& batch, std::span<const PositionIndex> positions) const {
  const auto cells = static_cast<std::size_t>(batch.rows * batch.cols);
  if (positions.size() != cells) throw Error(ErrorCode::kShapeMismatch, "position count != grid cells");
  if (batch.samples.empty()) throw Error(ErrorCode::kOutOfRange, "empty grid batch");
  std::vector<double> feats;
  feats.reserve(batch.samples.size() * cells * cfg_.feature_dim);
  for (const GridSample* s : batch.samples) {
    if (s->features.size() != cells * cfg_.feature_dim)
      throw Error(ErrorCode::kShapeMismatch, "grid sample does not match batch extent");
    feats.insert(feats.end(), s->features.begin(), s->features.end());
  }
  const std::vector<long> extent = extent_of(batch);
  auto ctx = pe_.prepare(positions, extent);
  Tensor x = patch_(Tensor::from({batch.samples.size(), cells, cfg_.feature_dim}, std::move(feats)));
  x = final_norm_(run_blocks(blocks_, x, *ctx));
  return head_(mean_rows(x));
}

Tensor GridModel::main_loss(const GridBatch& batch, std::span<const PositionIndex> positions, bool) const {
  std::vector<int> labels;
  for (const GridSample* s : batch.samples) labels.push_back(s->label);
  return cross_entropy(logits(batch, positions), labels);
}

ParameterList GridModel::parameters() const {
  ParameterList out;
  pe_.collect(out);
  patch_.collect("vit.patch", out);
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect("vit.block" + std::to_string(l), out);
  final_norm_.collect("vit.final_norm", out);
  head_.collect("vit.head", out);
  return out;
}

GridBatch make_grid_batch(const GridDataset& ds, std::span<const std::size_t> indices) {
  GridBatch b{ds.rows, ds.cols, {}};
  for (std::size_t i : indices) b.samples.push_back(&ds.samples.at(i));
  return b;
}

}  // namespace seqpe
