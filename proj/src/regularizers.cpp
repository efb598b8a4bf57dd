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

#include "seqpe/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include "seqpe/error.hpp"

namespace seqpe {

ContrastiveBatch ContrastiveBatch::from_set(const PositionIndex& pivot, const ContrastiveSet& set) {
  return {pivot, set.candidates, set.candidates.at(set.positive)};
}

namespace {

std::size_t positive_index(const ContrastiveBatch& b) {
  auto it = std::find(b.candidates.begin(), b.candidates.end(), b.positive);
  if (it == b.candidates.end())
    throw Error(ErrorCode::kPositiveNotInSet, "positive " + b.positive.str() + " not among candidates");
  return static_cast<std::size_t>(it - b.candidates.begin());
}

}  // namespace

Tensor contrastive_loss_from_embeddings(const Tensor& pivot, const Tensor& candidates, std::size_t positive) {
  const std::size_t m = candidates.dim(0), d = candidates.dim(1);
  if (positive >= m) throw Error(ErrorCode::kPositiveNotInSet, "positive index outside candidate set");
  Tensor logits = reshape(matmul(candidates, reshape(pivot, {d, 1})), {1, m});
  const int target = static_cast<int>(positive);
  return cross_entropy(logits, std::span<const int>(&target, 1));
}

Tensor contrastive_loss(const SeqPEEncoder& encoder, const ContrastiveBatch& batch) {
  return contrastive_loss(encoder, std::span<const ContrastiveBatch>(&batch, 1));
}

Tensor contrastive_loss(const SeqPEEncoder& encoder, std::span<const ContrastiveBatch> batches) {
  if (batches.empty()) throw Error(ErrorCode::kOutOfRange, "no contrastive batches");
  const std::size_t m = batches[0].candidates.size();
  if (m == 0) throw Error(ErrorCode::kOutOfRange, "empty candidate set");
  std::vector<PositionIndex> all;
  std::vector<long> pivot_ids, cand_ids;
  std::vector<int> targets;
  for (const auto& b : batches) {
    if (b.candidates.size() != m) throw Error(ErrorCode::kShapeMismatch, "candidate sets differ in size");
    targets.push_back(static_cast<int>(positive_index(b)));
    pivot_ids.push_back(static_cast<long>(all.size()));
    all.push_back(b.pivot);
    for (const auto& c : b.candidates) {
      cand_ids.push_back(static_cast<long>(all.size()));
      all.push_back(c);
    }
  }
  const std::size_t p = batches.size(), d = encoder.width();
  Tensor e = encoder.encode_batch(all);
  Tensor piv = reshape(gather_rows(e, pivot_ids), {p, d, 1});
  Tensor cand = reshape(gather_rows(e, cand_ids), {p, m, d});
  Tensor logits = reshape(matmul(cand, piv), {p, m});
  return cross_entropy(logits, targets);
}

Tensor similarity_matrix(const Tensor& embeddings) {
  return softmax_lastdim(matmul(embeddings, transpose(embeddings)));
}

Tensor ood_distill_loss_from_embeddings(const Tensor& teacher, const Tensor& student, std::size_t heads) {
  if (teacher.shape() != student.shape() || teacher.rank() != 2)
    throw Error(ErrorCode::kShapeMismatch, "teacher and student embeddings differ in shape");
  const std::size_t m = teacher.dim(0), d = teacher.dim(1);
  if (heads == 0 || d % heads != 0)
    throw Error(ErrorCode::kHeadMismatch, std::to_string(heads) + " heads do not divide width " + std::to_string(d));
  if (m < 2) throw Error(ErrorCode::kOutOfRange, "distillation needs at least two teachers");
  Tensor log_p;
  {
    NoGradGuard guard;
    Tensor t = split_heads(teacher.detach(), heads);
    log_p = log_softmax_lastdim(matmul(t, transpose(t)));
  }
  Tensor s = split_heads(student, heads);
  Tensor log_s = log_softmax_lastdim(matmul(s, transpose(s)));
  // sum_j P (log P - log S); P log P is constant.
  std::vector<double> p(log_p.numel());
  double entropy_term = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_p.data()[i]);
    entropy_term += p[i] * log_p.data()[i];
  }
  Tensor p_t = Tensor::from(log_p.shape(), std::move(p));
  Tensor cross = sum(mul(p_t, log_s));
  const double rows = static_cast<double>(heads * m);
  return scale(add_scalar(neg(cross), entropy_term), 1.0 / rows);
}

Tensor ood_distill_loss(const SeqPEEncoder& encoder, const DistillBatch& batch) {
  std::vector<PositionIndex> students;
  students.reserve(batch.teachers.size());
  for (const auto& t : batch.teachers) students.push_back(shifted(t, batch.shift));
  Tensor teacher;
  {
    NoGradGuard guard;
    teacher = encoder.encode_batch(batch.teachers);
  }
  return ood_distill_loss_from_embeddings(teacher, encoder.encode_batch(students), batch.heads);
}

ShiftResult apply_random_shift(std::span<const PositionIndex> positions, double prob, const TrainRegion& region,
                               std::span<const long> extent, Rng& rng) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ErrorCode::kOutOfRange, "shift probability outside [0, 1]");
  ShiftResult r;
  r.positions.assign(positions.begin(), positions.end());
  r.shift.z.assign(region.limits.size(), 0);
  if (!rng.bernoulli(prob)) return r;
  r.shift = sample_shift(region, extent, rng);
  r.applied = true;
  for (auto& p : r.positions) p = shifted(p, r.shift);
  return r;
}

long min_reg_batch_size(long max_length) {
  if (max_length < 1) throw Error(ErrorCode::kOutOfRange, "L_max must be >= 1");
  return (16 * max_length + 9999) / 10000;
}

}  // namespace seqpe
