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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "seqpe/error.hpp"
#include "seqpe/grad_check.hpp"
#include "seqpe/regularizers.hpp"
#include "test_util.hpp"

namespace seqpe {
namespace {

using testing::random_tensor;
namespace oracle = testing::oracle;

SeqPEEncoder tiny_encoder(std::uint64_t seed = 1, int dims = 1) {
  Rng rng(seed);
  EncoderConfig cfg;
  cfg.seq = {10, 4, dims};
  cfg.width = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  return SeqPEEncoder(cfg, rng);
}

TEST(ContrastiveTest, KnownValues) {
  Tensor pivot = Tensor::from({2}, {1.0, 0.0});
  EXPECT_NEAR(contrastive_loss_from_embeddings(pivot, Tensor::from({1, 2}, {0.3, 0.9}), 0).item(), 0.0, 1e-15);
  Tensor equal = Tensor::from({2, 2}, {0.5, 1.0, 0.5, -1.0});
  EXPECT_NEAR(contrastive_loss_from_embeddings(pivot, equal, 1).item(), std::log(2.0), 1e-15);
  Tensor dots = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const double l = contrastive_loss_from_embeddings(pivot, dots, 0).item();
  EXPECT_NEAR(l, std::log(1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(l, 0.3133, 1e-4);
}

TEST(ContrastiveTest, MatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.below(10), d = 1 + rng.below(8);
    Tensor pivot = random_tensor({d}, rng), cands = random_tensor({m, d}, rng);
    const std::size_t pos = rng.below(m);
    std::vector<double> pv(pivot.data().begin(), pivot.data().end());
    EXPECT_NEAR(contrastive_loss_from_embeddings(pivot, cands, pos).item(),
                oracle::contrastive(pv, oracle::to_matrix(cands), pos), 1e-12);
  }
}

TEST(ContrastiveTest, EncoderBatchedMatchesPerPivot) {
  SeqPEEncoder enc = tiny_encoder();
  Rng rng(3);
  const std::vector<long> ext{5000};
  std::vector<ContrastiveBatch> batches;
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    PositionIndex p = sample_pivot(ext, rng);
    auto set = sample_contrastive_set(p, 6, ext, SamplingStrategy::kMixed, enc.config().seq, rng);
    batches.push_back(ContrastiveBatch::from_set(p, set));
    Tensor piv = enc.encode_position(p);
    Tensor cands = enc.encode_batch(set.candidates);
    std::vector<double> pv(piv.data().begin(), piv.data().end());
    expect += oracle::contrastive(pv, oracle::to_matrix(cands), set.positive);
  }
  EXPECT_NEAR(contrastive_loss(enc, batches).item(), expect / 4.0, 1e-12);
  ContrastiveBatch bad = batches[0];
  bad.positive = bad.pivot;
  try {
    contrastive_loss(enc, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPositiveNotInSet);
  }
}

TEST(SimilarityTest, KnownValues) {
  Tensor same = Tensor::full({4, 3}, 0.7);
  Tensor uniform = similarity_matrix(same);
  for (double v : uniform.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_EQ(similarity_matrix(Tensor::from({1, 3}, {1, 2, 3})).item(), 1.0);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor e = random_tensor({7, 5}, rng);
    Tensor s = similarity_matrix(e);
    for (std::size_t r = 0; r < 7; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) total += s.at({r, c});
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    auto ref = oracle::similarity(oracle::to_matrix(e));
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < 7; ++c) EXPECT_NEAR(s.at({r, c}), ref[r][c], 1e-12);
  }
}

TEST(DistillTest, KnownValues) {
  Rng rng(5);
  Tensor e = random_tensor({5, 8}, rng);
  EXPECT_NEAR(ood_distill_loss_from_embeddings(e, e, 2).item(), 0.0, 1e-15);

  // Teacher row 0 scores [1, 0]; student rows identical, hence uniform.
  Tensor teacher = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 0.0});
  Tensor student = Tensor::from({2, 2}, {0.0, 0.0, 0.0, 0.0});
  const double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  const double row0 = p0 * std::log(p0 / 0.5) + (1 - p0) * std::log((1 - p0) / 0.5);
  EXPECT_NEAR(row0, 0.1109, 1e-4);
  // Row 1 of the teacher is uniform too, so it contributes 0.
  EXPECT_NEAR(ood_distill_loss_from_embeddings(teacher, student, 1).item(), row0 / 2.0, 1e-15);
  try {
    ood_distill_loss_from_embeddings(e, e, 3);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kHeadMismatch);
  }
}

TEST(DistillTest, MatchesBruteForce) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t heads = 1 + rng.below(3), m = 2 + rng.below(6), d = heads * (1 + rng.below(4));
    Tensor t = random_tensor({m, d}, rng), s = random_tensor({m, d}, rng);
    EXPECT_NEAR(ood_distill_loss_from_embeddings(t, s, heads).item(),
                oracle::ood_distill(oracle::to_matrix(t), oracle::to_matrix(s), heads), 1e-12);
  }
}

TEST(DistillTest, StopGradientOnTeacher) {
  Rng rng(7);
  Tensor t = random_tensor({4, 6}, rng, 1.0, true), s = random_tensor({4, 6}, rng, 1.0, true);
  ood_distill_loss_from_embeddings(t, s, 2).backward();
  EXPECT_FALSE(t.has_grad() && std::any_of(t.grad().begin(), t.grad().end(), [](double g) { return g != 0.0; }));
  EXPECT_TRUE(s.has_grad());

  // Through the encoder: with a zero shift the loss is 0 and, since the
  // teacher path is detached, the gradient is that of KL at its minimum.
  SeqPEEncoder enc = tiny_encoder(8);
  ParameterList params;
  enc.collect(params);
  DistillBatch b{{{1}, {5}, {9}, {30}}, ShiftVector{{0}}, 2};
  zero_grads(params);
  Tensor loss = ood_distill_loss(enc, b);
  EXPECT_NEAR(loss.item(), 0.0, 1e-15);
  loss.backward();
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) EXPECT_NEAR(g, 0.0, 1e-14);
  }
}

TEST(DistillTest, GradCheckWithShift) {
  SeqPEEncoder enc = tiny_encoder(9);
  ParameterList params;
  enc.collect(params);
  DistillBatch b{{{1}, {5}, {9}, {30}}, ShiftVector{{4321}}, 2};
  GradCheckOptions opt;
  opt.per_parameter = 3;
  GradCheckReport r = grad_check([&] { return ood_distill_loss(enc, b); }, params, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(ShiftTest, KnownCases) {
  Rng rng(10);
  const TrainRegion region{{4}};
  const std::vector<long> ext{100000};
  std::vector<PositionIndex> ps{{0}, {1}, {2}, {3}};
  for (int i = 0; i < 100; ++i) {
    auto r = apply_random_shift(ps, 0.0, region, ext, rng);
    EXPECT_FALSE(r.applied);
    EXPECT_EQ(r.positions, ps);
  }
  auto r = apply_random_shift(ps, 1.0, region, ext, rng);
  EXPECT_TRUE(r.applied);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.positions[i][0], r.shift.z[0] + static_cast<long>(i));
  EXPECT_LE(r.shift.z[0], 100000 - 4);

  int applied = 0;
  for (int i = 0; i < 10000; ++i) applied += apply_random_shift(ps, 0.1, region, ext, rng).applied;
  EXPECT_GE(applied, 800);
  EXPECT_LE(applied, 1200);
}

TEST(MinRegBatchTest, KnownValues) {
  EXPECT_EQ(min_reg_batch_size(20000), 32);
  EXPECT_EQ(min_reg_batch_size(10000), 16);
  EXPECT_EQ(min_reg_batch_size(1), 1);
}

}  // namespace
}  // namespace seqpe
