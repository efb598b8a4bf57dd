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

#include "seqpe/training.hpp"

#include <algorithm>
#include <cmath>

#include "seqpe/error.hpp"

namespace seqpe {

RegBatches sample_reg_batches(const RegularizerConfig& cfg, const TrainRegion& region, const PosSeqConfig& seq,
                              const LossWeights& weights, Rng& rng) {
  RegBatches out;
  if (weights.alpha > 0.0) {
    Rng r = rng.split(1);
    for (std::size_t i = 0; i < cfg.pivots; ++i) {
      PositionIndex pivot = sample_pivot(cfg.max_extent, r);
      auto set = sample_contrastive_set(pivot, cfg.candidates, cfg.max_extent, cfg.strategy, seq, r);
      out.contrastive.push_back(ContrastiveBatch::from_set(pivot, set));
    }
  }
  if (weights.beta > 0.0) {
    Rng r = rng.split(2);
    OodSample s = sample_ood_batch(region, cfg.teachers, seq, r, cfg.max_extent);
    out.distill = DistillBatch{std::move(s.teachers), std::move(s.shift), cfg.distill_heads};
  }
  return out;
}

namespace {

template <class Model, class Batch>
Tensor objective(const Model& model, const Batch& batch, std::span<const PositionIndex> positions,
                 const RegBatches& reg, const LossWeights& weights, StepMetrics* metrics) {
  Tensor main = model.main_loss(batch, positions, true);
  Tensor total = main;
  StepMetrics m;
  m.main = main.item();
  if (model.pe().is_seqpe()) {
    const SeqPEEncoder& enc = model.pe().encoder();
    if (weights.alpha > 0.0 && !reg.contrastive.empty()) {
      Tensor d = contrastive_loss(enc, reg.contrastive);
      m.delta = d.item();
      total = add(total, scale(d, weights.alpha));
    }
    if (weights.beta > 0.0 && reg.distill) {
      Tensor o = ood_distill_loss(enc, *reg.distill);
      m.ood = o.item();
      total = add(total, scale(o, weights.beta));
    }
  }
  m.total = m.main + weights.alpha * m.delta + weights.beta * m.ood;
  if (metrics != nullptr) *metrics = m;
  return total;
}

template <class Model, class Batch>
StepMetrics step(Model& model, const Batch& batch, const RegBatches& reg, const LossWeights& weights,
                 const RegularizerConfig& reg_cfg, AdamState& adam, Rng& rng) {
  if (weights.alpha < 0.0 || weights.beta < 0.0) throw Error(ErrorCode::kConfigInvalid, "negative loss weight");
  const std::vector<long> extent = Model::extent_of(batch);
  std::vector<PositionIndex> positions = grid_positions(extent);
  bool shifted = false;
  if (model.pe().is_seqpe() && reg_cfg.shift_prob > 0.0) {
    ShiftResult s = apply_random_shift(positions, reg_cfg.shift_prob, TrainRegion{extent}, reg_cfg.max_extent, rng);
    positions = std::move(s.positions);
    shifted = s.applied;
  }
  ParameterList params = model.parameters();
  zero_grads(params);
  StepMetrics m;
  Tensor total = objective(model, batch, positions, reg, weights, &m);
  m.shifted = shifted;
  total.backward();
  adam_step(adam, params);
  return m;
}

}  // namespace

StepMetrics train_step(TinyLM& model, const TokenBatch& batch, const RegBatches& reg, const LossWeights& weights,
                       const RegularizerConfig& reg_cfg, AdamState& adam, Rng& rng) {
  return step(model, batch, reg, weights, reg_cfg, adam, rng);
}

StepMetrics train_step(GridModel& model, const GridBatch& batch, const RegBatches& reg, const LossWeights& weights,
                       const RegularizerConfig& reg_cfg, AdamState& adam, Rng& rng) {
  return step(model, batch, reg, weights, reg_cfg, adam, rng);
}

Tensor full_objective(const TinyLM& model, const TokenBatch& batch, std::span<const PositionIndex> positions,
                      const RegBatches& reg, const LossWeights& weights) {
  return objective(model, batch, positions, reg, weights, nullptr);
}

Tensor full_objective(const GridModel& model, const GridBatch& batch, std::span<const PositionIndex> positions,
                      const RegBatches& reg, const LossWeights& weights) {
  return objective(model, batch, positions, reg, weights, nullptr);
}

double eval_perplexity(const TinyLM& model, std::span<const int> corpus, std::size_t chunk_len, std::size_t batch) {
  if (chunk_len < 2) throw Error(ErrorCode::kOutOfRange, "chunk length must be >= 2");
  const std::size_t chunks = corpus.size() / chunk_len;
  if (chunks == 0) throw Error(ErrorCode::kEmptyCorpus, "corpus shorter than one chunk");
  NoGradGuard guard;
  const auto positions = grid_positions(std::vector<long>{static_cast<long>(chunk_len)});
  batch = std::max<std::size_t>(batch, 1);
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < chunks; c += batch) {
    TokenBatch tb;
    for (std::size_t i = c; i < std::min(chunks, c + batch); ++i)
      tb.emplace_back(corpus.begin() + static_cast<long>(i * chunk_len),
                      corpus.begin() + static_cast<long>((i + 1) * chunk_len));
    const std::size_t predicted = tb.size() * (chunk_len - 1);
    nll += model.main_loss(tb, positions, false).item() * static_cast<double>(predicted);
    count += predicted;
  }
  return std::exp(nll / static_cast<double>(count));
}

double eval_accuracy(const GridModel& model, const GridDataset& data, std::size_t batch) {
  if (data.samples.empty()) throw Error(ErrorCode::kOutOfRange, "empty evaluation set");
  NoGradGuard guard;
  const std::vector<long> extent{data.rows, data.cols};
  const auto positions = grid_positions(extent);
  batch = std::max<std::size_t>(batch, 1);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.samples.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.samples.size(), start + batch); ++i) idx.push_back(i);
    GridBatch gb = make_grid_batch(data, idx);
    Tensor logits = model.logits(gb, positions);
    const std::size_t classes = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto row = logits.data().subspan(r * classes, classes);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == gb.samples[r]->label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

double eval_accuracy_at_resolution(const GridModel& model, long rows, long cols, std::uint64_t seed,
                                   std::size_t count) {
  const auto& cfg = model.config();
  return eval_accuracy(model, synth2d_generate(seed, rows, cols, cfg.classes, count, cfg.feature_dim));
}

}  // namespace seqpe
