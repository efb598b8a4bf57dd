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

#include <optional>
#include <span>
#include <vector>

#include "seqpe/models.hpp"
#include "seqpe/optim.hpp"

namespace seqpe {

struct RegularizerConfig {
  std::size_t pivots = 8;       // contrastive pivots per step
  std::size_t candidates = 32;  // |C_delta|
  SamplingStrategy strategy = SamplingStrategy::kMixed;
  std::size_t teachers = 32;    // |C_OOD|
  std::size_t distill_heads = 4;
  // L_max per dimension: pivots, candidates and shifts stay below it.
  std::vector<long> max_extent{20000};
  double shift_prob = 0.1;
};

struct RegBatches {
  std::vector<ContrastiveBatch> contrastive;
  std::optional<DistillBatch> distill;
};

// Draws only the batches whose weight is nonzero.
RegBatches sample_reg_batches(const RegularizerConfig& cfg, const TrainRegion& region, const PosSeqConfig& seq,
                              const LossWeights& weights, Rng& rng);

struct StepMetrics {
  double main = 0.0;
  double delta = 0.0;
  double ood = 0.0;
  double total = 0.0;
  bool shifted = false;
};

// L_main (positions randomly shifted for SeqPE), L_delta and L_OOD, backward
// on L_main + alpha L_delta + beta L_OOD, then one Adam step. Non-SeqPE
// models ignore the regularizers. Zero-weight terms are skipped and report 0.
StepMetrics train_step(TinyLM& model, const TokenBatch& batch, const RegBatches& reg, const LossWeights& weights,
                       const RegularizerConfig& reg_cfg, AdamState& adam, Rng& rng);
StepMetrics train_step(GridModel& model, const GridBatch& batch, const RegBatches& reg, const LossWeights& weights,
                       const RegularizerConfig& reg_cfg, AdamState& adam, Rng& rng);

// Builds the full objective without stepping; used by gradient checks.
Tensor full_objective(const TinyLM& model, const TokenBatch& batch, std::span<const PositionIndex> positions,
                      const RegBatches& reg, const LossWeights& weights);
Tensor full_objective(const GridModel& model, const GridBatch& batch, std::span<const PositionIndex> positions,
                      const RegBatches& reg, const LossWeights& weights);

// exp(mean token NLL) over non-overlapping chunks of `chunk_len` tokens at
// positions [0, chunk_len); the trailing partial chunk is dropped.
double eval_perplexity(const TinyLM& model, std::span<const int> corpus, std::size_t chunk_len,
                       std::size_t batch = 8);
double eval_accuracy(const GridModel& model, const GridDataset& data, std::size_t batch = 32);
// Accuracy on a freshly generated held-out set at h x w.
double eval_accuracy_at_resolution(const GridModel& model, long rows, long cols, std::uint64_t seed,
                                   std::size_t count = 256);

}  // namespace seqpe
