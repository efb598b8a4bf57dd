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
#include <numeric>

#include <gtest/gtest.h>

#include "seqpe/corpus.hpp"
#include "seqpe/error.hpp"
#include "seqpe/grad_check.hpp"
#include "seqpe/run_config.hpp"
#include "seqpe/training.hpp"
#include "test_util.hpp"

namespace seqpe {
namespace {

RunConfig small_lm(PeKind pe, std::size_t width = 16) {
  RunConfig c;
  c.task = TaskKind::kLm;
  c.pe = pe;
  c.width = width;
  c.heads = 2;
  c.encoder_heads = 2;
  c.layers = 1;
  c.encoder_layers = 1;
  c.vocab = 16;
  c.train_length = 8;
  c.max_length = 1000;
  c.base = 10;
  c.digits = 4;
  return c;
}

RunConfig small_grid(PeKind pe, std::size_t classes = 4) {
  RunConfig c = small_lm(pe);
  c.task = TaskKind::kGrid2d;
  c.rows = 4;
  c.cols = 4;
  c.classes = classes;
  c.feature_dim = 4;
  c.max_length = 100;
  c.digits = 3;
  return c;
}

TEST(CorpusTest, MarkovDeterministicAndLagged) {
  MarkovCorpusOptions opt;
  auto a = markov_corpus(3, 5000, opt), b = markov_corpus(3, 5000, opt);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, markov_corpus(4, 5000, opt));
  for (int t : a) {
    EXPECT_GE(t, 0);
    EXPECT_LT(t, 128);
  }
  // The lag-2 map should make x_t a function of x_{t-2} most of the time.
  std::vector<std::vector<int>> counts(128, std::vector<int>(128, 0));
  for (std::size_t t = 2; t < a.size(); ++t) counts[a[t - 2]][a[t]]++;
  std::size_t top = 0;
  for (const auto& row : counts) top += *std::max_element(row.begin(), row.end());
  EXPECT_GT(static_cast<double>(top) / static_cast<double>(a.size() - 2), 0.75);
}

TEST(CorpusTest, WindowsAndErrors) {
  std::vector<int> corpus(100);
  std::iota(corpus.begin(), corpus.end(), 0);
  Rng rng(1);
  auto w = sample_windows(corpus, 5, 10, rng);
  ASSERT_EQ(w.size(), 5u);
  for (const auto& row : w) {
    ASSERT_EQ(row.size(), 10u);
    for (std::size_t i = 1; i < row.size(); ++i) EXPECT_EQ(row[i], row[i - 1] + 1);
  }
  try {
    byte_corpus("/nonexistent/seqpe/corpus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(GridDataTest, DeterministicBalancedAndGeometric) {
  GridDataset a = synth2d_generate(5, 6, 6, 4, 40), b = synth2d_generate(5, 6, 6, 4, 40);
  ASSERT_EQ(a.samples.size(), 40u);
  std::vector<int> per_class(4, 0);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].features, b.samples[i].features);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    EXPECT_EQ(arrangement_label(a.samples[i], a), a.samples[i].label);
    per_class[a.samples[i].label]++;
  }
  for (int c : per_class) EXPECT_EQ(c, 10);
  for (std::size_t c = 0; c < kMaxGridClasses; ++c)
    for (std::size_t d = c + 1; d < kMaxGridClasses; ++d) EXPECT_NE(constellation(c), constellation(d));
}

TEST(GridDataTest, ShufflingPatchesBreaksTheLabel) {
  GridDataset ds = synth2d_generate(6, 6, 6, 4, 100);
  Rng rng(7);
  int changed = 0;
  for (auto s : ds.samples) {
    std::vector<std::size_t> perm(36);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    GridSample shuffled = s;
    for (std::size_t cell = 0; cell < 36; ++cell)
      std::copy_n(s.features.begin() + static_cast<long>(perm[cell] * ds.feature_dim), ds.feature_dim,
                  shuffled.features.begin() + static_cast<long>(cell * ds.feature_dim));
    changed += arrangement_label(shuffled, ds) != s.label;
  }
  EXPECT_GT(changed, 90);
}

TEST(LmTest, UntrainedLossNearLnV) {
  RunConfig c = small_lm(PeKind::kSeqPE, 64);
  c.vocab = 128;
  c.heads = 4;
  Rng rng(1);
  TinyLM lm(lm_config(c), rng);
  Rng data(2);
  auto batch = sample_windows(markov_corpus(1, 4000), 4, 8, data);
  auto pos = grid_positions(std::vector<long>{8});
  EXPECT_NEAR(lm.main_loss(batch, pos, true).item(), std::log(128.0), 0.05);
  auto too_long = sample_windows(markov_corpus(1, 4000), 1, 9, data);
  auto pos9 = grid_positions(std::vector<long>{9});
  try {
    lm.main_loss(too_long, pos9, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContextTooLong);
  }
  EXPECT_NO_THROW(lm.main_loss(too_long, pos9, false));
}

TEST(LmTest, FutureTokensGetNoGradient) {
  for (PeKind pe : {PeKind::kNope, PeKind::kSeqPE, PeKind::kRope, PeKind::kAlibi, PeKind::kApeLearn}) {
    RunConfig c = small_lm(pe);
    Rng rng(3);
    TinyLM lm(lm_config(c), rng);
    TokenBatch batch{{1, 2, 3, 4, 5, 6, 7, 8}};
    auto pos = grid_positions(std::vector<long>{8});
    lm.token_embedding().zero_grad();
    Tensor logits = lm.logits(batch, pos);
    // Loss on the prediction made at position 3 only.
    sum(select_row(reshape(logits, {1, 8, 16}), 3)).backward();
    auto g = lm.token_embedding().grad();
    for (int tok = 5; tok <= 8; ++tok)
      for (std::size_t c2 = 0; c2 < 16; ++c2) EXPECT_EQ(g[tok * 16 + c2], 0.0) << pe_kind_name(pe);
    double seen = 0.0;
    for (std::size_t c2 = 0; c2 < 16; ++c2) seen += std::fabs(g[1 * 16 + c2]);
    EXPECT_GT(seen, 0.0);
  }
}

TEST(LmTest, DeterministicBigramIsLearned) {
  RunConfig c = small_lm(PeKind::kNope, 32);
  Rng rng(4);
  TinyLM lm(lm_config(c), rng);
  std::vector<int> corpus(2000);
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i] = static_cast<int>((i * 5) % 16);
  AdamState adam = make_adam_state(lm.parameters(), 3e-3);
  RegularizerConfig reg;
  Rng data(5);
  std::vector<double> curve;
  for (int step = 0; step < 200; ++step) {
    auto batch = sample_windows(corpus, 8, 8, data);
    curve.push_back(train_step(lm, batch, {}, {0.0, 0.0}, reg, adam, data).main);
  }
  EXPECT_LT(curve.back(), 0.1);
  EXPECT_LT(std::accumulate(curve.end() - 20, curve.end(), 0.0), std::accumulate(curve.begin(), curve.begin() + 20, 0.0));
}

TEST(TrainStepTest, ZeroWeightsMatchMainOnlyBitForBit) {
  RunConfig c = small_lm(PeKind::kSeqPE);
  Rng ra(6), rb(6);
  TinyLM a(lm_config(c), ra), b(lm_config(c), rb);
  TokenBatch batch{{1, 2, 3, 4, 5, 6, 7, 8}, {8, 7, 6, 5, 4, 3, 2, 1}};
  RegularizerConfig reg = reg_config(c);
  reg.shift_prob = 0.0;
  AdamState sa = make_adam_state(a.parameters(), 1e-3, 0.01), sb = make_adam_state(b.parameters(), 1e-3, 0.01);
  Rng step_rng(7);
  Rng reg_rng(8);
  RegBatches rb_batches = sample_reg_batches(reg, TrainRegion{{8}}, {10, 4, 1}, {0.0, 0.0}, reg_rng);
  EXPECT_TRUE(rb_batches.contrastive.empty());
  EXPECT_FALSE(rb_batches.distill.has_value());
  StepMetrics m = train_step(a, batch, rb_batches, {0.0, 0.0}, reg, sa, step_rng);
  EXPECT_EQ(m.delta, 0.0);
  EXPECT_EQ(m.ood, 0.0);

  ParameterList pb = b.parameters();
  zero_grads(pb);
  auto pos = grid_positions(std::vector<long>{8});
  b.main_loss(batch, pos, true).backward();
  adam_step(sb, pb);
  ParameterList pa = a.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_TRUE(testing::bit_equal(pa[i].tensor.data(), pb[i].tensor.data())) << pa[i].name;
}

TEST(TrainStepTest, TotalIsWeightedSum) {
  RunConfig c = small_lm(PeKind::kSeqPE);
  c.reg_pivots = 2;
  c.reg_batch_size = 8;
  Rng rng(9);
  TinyLM lm(lm_config(c), rng);
  RegularizerConfig reg = reg_config(c);
  AdamState adam = make_adam_state(lm.parameters(), 1e-3);
  Rng r(10);
  TokenBatch batch{{1, 2, 3, 4, 5, 6, 7, 8}};
  for (int i = 0; i < 5; ++i) {
    RegBatches rb = sample_reg_batches(reg, TrainRegion{{8}}, {10, 4, 1}, {0.1, 0.1}, r);
    EXPECT_EQ(rb.contrastive.size(), 2u);
    ASSERT_TRUE(rb.distill.has_value());
    StepMetrics m = train_step(lm, batch, rb, {0.1, 0.1}, reg, adam, r);
    EXPECT_EQ(m.total, m.main + 0.1 * m.delta + 0.1 * m.ood);
    EXPECT_GT(m.delta, 0.0);
  }
}

TEST(TrainStepTest, RegularizersIgnoredForBaselines) {
  RunConfig c = small_lm(PeKind::kRope);
  c.reg_batch_size = 4;
  Rng rng(11);
  TinyLM lm(lm_config(c), rng);
  AdamState adam = make_adam_state(lm.parameters(), 1e-3);
  RegularizerConfig reg = reg_config(c);
  Rng r(12);
  RegBatches rb = sample_reg_batches(reg, TrainRegion{{8}}, {10, 4, 1}, {0.1, 0.1}, r);
  StepMetrics m = train_step(lm, {{1, 2, 3, 4, 5, 6, 7, 8}}, rb, {0.1, 0.1}, reg, adam, r);
  EXPECT_EQ(m.delta, 0.0);
  EXPECT_EQ(m.ood, 0.0);
  EXPECT_FALSE(m.shifted);
}

TEST(EvalTest, UniformModelHasPerplexityV) {
  RunConfig c = small_lm(PeKind::kNope);
  Rng rng(13);
  TinyLM lm(lm_config(c), rng);
  for (Tensor* t : {&lm.head().weight, &lm.head().bias}) std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
  auto corpus = markov_corpus(2, 400, {16, 2, 0.8, 4});
  EXPECT_NEAR(eval_perplexity(lm, corpus, 8), 16.0, 16.0 * 0.02);
}

TEST(EvalTest, SingleChunkAndOrderInvariance) {
  RunConfig c = small_lm(PeKind::kSeqPE);
  Rng rng(14);
  TinyLM lm(lm_config(c), rng);
  auto corpus = markov_corpus(3, 8 * 13 + 5, {16, 2, 0.8, 4});
  std::vector<int> one(corpus.begin(), corpus.begin() + 8);
  auto pos = grid_positions(std::vector<long>{8});
  double single;
  {
    NoGradGuard g;
    single = std::exp(lm.main_loss({one}, pos, false).item());
  }
  EXPECT_NEAR(eval_perplexity(lm, one, 8), single, 1e-12);

  const double ppl = eval_perplexity(lm, corpus, 8, 4);
  EXPECT_NEAR(eval_perplexity(lm, corpus, 8, 1), ppl, 1e-12);
  std::vector<std::size_t> order(13);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  double nll = 0.0;
  NoGradGuard g;
  for (std::size_t i : order) {
    TokenBatch b{std::vector<int>(corpus.begin() + static_cast<long>(i * 8), corpus.begin() + static_cast<long>(i * 8 + 8))};
    nll += lm.main_loss(b, pos, false).item();
  }
  EXPECT_NEAR(std::exp(nll / 13.0), ppl, 1e-12);
}

TEST(GridModelTest, UntrainedNearLnClassesAndSingleClassSaturates) {
  RunConfig c = small_grid(PeKind::kSeqPE);
  Rng rng(15);
  GridModel model(grid_config(c), rng);
  GridDataset ds = synth2d_generate(1, 4, 4, 4, 32, 4);
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), 0);
  auto pos = grid_positions(std::vector<long>{4, 4});
  EXPECT_NEAR(model.main_loss(make_grid_batch(ds, idx), pos, true).item(), std::log(4.0), 0.1);
  const double acc = eval_accuracy(model, ds);
  EXPECT_LE(acc, 0.6);
  EXPECT_EQ(eval_accuracy_at_resolution(model, 4, 4, 1, 32), acc);

  RunConfig one = small_grid(PeKind::kNope, 1);
  Rng r2(16);
  GridModel single(grid_config(one), r2);
  GridDataset ds1 = synth2d_generate(2, 4, 4, 1, 16, 4);
  AdamState adam = make_adam_state(single.parameters(), 1e-2);
  std::vector<std::size_t> all(16);
  std::iota(all.begin(), all.end(), 0);
  StepMetrics m;
  for (int i = 0; i < 5; ++i) m = train_step(single, make_grid_batch(ds1, all), {}, {0, 0}, reg_config(one), adam, r2);
  EXPECT_EQ(m.main, 0.0);
}

class GridGradTest : public ::testing::TestWithParam<AttentionMode> {};

TEST_P(GridGradTest, FullObjectivePasses) {
  RunConfig c = small_grid(PeKind::kSeqPE);
  c.width = 8;
  c.fusion = GetParam();
  c.reg_pivots = 2;
  c.reg_batch_size = 4;
  Rng rng(17);
  GridModel model(grid_config(c), rng);
  GridDataset ds = synth2d_generate(3, 4, 4, 4, 2, 4);
  std::vector<std::size_t> idx{0, 1};
  GridBatch gb = make_grid_batch(ds, idx);
  Rng r(18);
  RegBatches rb = sample_reg_batches(reg_config(c), TrainRegion{{4, 4}}, {10, 3, 2}, {0.1, 0.1}, r);
  auto pos = grid_positions(std::vector<long>{4, 4});
  GradCheckOptions opt;
  opt.per_parameter = 2;
  GradCheckReport rep = grad_check([&] { return full_objective(model, gb, pos, rb, {0.1, 0.1}); },
                                   model.parameters(), opt);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

INSTANTIATE_TEST_SUITE_P(Fusion, GridGradTest,
                         ::testing::Values(AttentionMode::kAttnSum, AttentionMode::kAttnMul, AttentionMode::kAttnBias));

}  // namespace
}  // namespace seqpe
