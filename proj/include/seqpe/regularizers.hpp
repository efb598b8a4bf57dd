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

#include "seqpe/encoder.hpp"
#include "seqpe/positions.hpp"

namespace seqpe {

struct LossWeights {
  double alpha = 0.1;  // contrastive distance alignment
  double beta = 0.1;   // OOD distillation
};

struct ContrastiveBatch {
  PositionIndex pivot;
  std::vector<PositionIndex> candidates;
  PositionIndex positive;

  static ContrastiveBatch from_set(const PositionIndex& pivot, const ContrastiveSet& set);
};

struct DistillBatch {
  std::vector<PositionIndex> teachers;
  ShiftVector shift;
  std::size_t heads = 1;
};

// -log softmax(C e_p)[positive] with candidate rows C [m, d] and pivot e_p [d].
Tensor contrastive_loss_from_embeddings(const Tensor& pivot, const Tensor& candidates, std::size_t positive);
// Throws PositiveNotInSet when the positive is not among the candidates.
Tensor contrastive_loss(const SeqPEEncoder& encoder, const ContrastiveBatch& batch);
// Mean over pivots, with every position encoded in one batch.
Tensor contrastive_loss(const SeqPEEncoder& encoder, std::span<const ContrastiveBatch> batches);

// Row-wise softmax of E E^T for E [m, d_head] (or [.., m, d_head]).
Tensor similarity_matrix(const Tensor& embeddings);

// KL(SG(P) || S) averaged over rows and heads, with P from the teacher
// embeddings (gradient stopped) and S from the student embeddings.
// Throws HeadMismatch unless heads divides d.
Tensor ood_distill_loss_from_embeddings(const Tensor& teacher, const Tensor& student, std::size_t heads);
Tensor ood_distill_loss(const SeqPEEncoder& encoder, const DistillBatch& batch);

struct ShiftResult {
  std::vector<PositionIndex> positions;
  ShiftVector shift;
  bool applied = false;
};

// With probability `prob` adds one shared z, sampled as in sample_shift over
// `extent`, to every position; otherwise returns them unchanged.
ShiftResult apply_random_shift(std::span<const PositionIndex> positions, double prob, const TrainRegion& region,
                               std::span<const long> extent, Rng& rng);

// ceil(16 * L_max / 10000).
long min_reg_batch_size(long max_length);

}  // namespace seqpe
