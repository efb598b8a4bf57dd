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
#include <set>

#include <gtest/gtest.h>

#include "seqpe/error.hpp"
#include "seqpe/positions.hpp"

namespace seqpe {
namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kFormat;
}

TEST(CodecTest, KnownExamples) {
  EXPECT_EQ(to_digit_sequence({2, 3}, {10, 2, 2}).tokens, (std::vector<int>{0, 2, 0, 3}));
  EXPECT_EQ(to_digit_sequence({123}, {10, 3, 1}).tokens, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(to_digit_sequence({7}, {10, 3, 1}).tokens, (std::vector<int>{0, 0, 7}));
  EXPECT_EQ(error_of([] { to_digit_sequence({1000}, {10, 3, 1}); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(error_of([] { to_digit_sequence({-1}, {10, 3, 1}); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(error_of([] { to_digit_sequence({1, 2}, {10, 3, 1}); }), ErrorCode::kDimMismatch);
  EXPECT_EQ(from_digit_sequence({{0, 2, 0, 3}}, {10, 2, 2}), (PositionIndex{2, 3}));
  EXPECT_EQ(from_digit_sequence({{0, 0, 0, 0, 0}}, {10, 5, 1}), (PositionIndex{0}));
  EXPECT_EQ(error_of([] { from_digit_sequence({{0, 10}}, {10, 2, 1}); }), ErrorCode::kBadToken);
}

TEST(CodecTest, ExhaustiveRoundTripBase10TwoDigitsTwoDims) {
  const PosSeqConfig cfg{10, 2, 2};
  for (long a = 0; a < 100; ++a)
    for (long b = 0; b < 100; ++b) {
      PositionIndex p{a, b};
      ASSERT_EQ(from_digit_sequence(to_digit_sequence(p, cfg), cfg), p);
    }
}

TEST(CodecTest, OtherBasesRoundTrip) {
  for (int base : {2, 3, 16}) {
    const PosSeqConfig cfg{base, 4, 1};
    for (long v = 0; v < cfg.capacity(); ++v) {
      PositionIndex p{v};
      ASSERT_EQ(from_digit_sequence(to_digit_sequence(p, cfg), cfg), p);
    }
  }
}

TEST(CodecTest, PaddingInvariant) {
  const PosSeqConfig cfg{10, 4, 2};
  for (long a = 0; a < 10; ++a) {
    auto s = to_digit_sequence({a, 9 - a}, cfg).tokens;
    for (int blk = 0; blk < 2; ++blk) {
      for (int j = 0; j < 3; ++j) EXPECT_EQ(s[blk * 4 + j], 0);
    }
    EXPECT_EQ(s[3], a);
    EXPECT_EQ(s[7], 9 - a);
  }
}

TEST(CodecTest, ConfigValidation) {
  EXPECT_EQ(error_of([] { PosSeqConfig{1, 3, 1}.validate(); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(error_of([] { PosSeqConfig{10, 0, 1}.validate(); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(error_of([] { PosSeqConfig{10, 3, 0}.validate(); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(error_of([] { PosSeqConfig{10, 40, 1}.validate(); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ((PosSeqConfig{10, 5, 1}.capacity()), 100000);
}

TEST(DistanceTest, KnownExamples) {
  EXPECT_EQ(distance({0, 0}, {3, 4}), 5.0);
  EXPECT_EQ(distance({5, 9}, {5, 9}), 0.0);
  EXPECT_EQ(distance({3, 4}, {0, 0}), distance({0, 0}, {3, 4}));
  EXPECT_EQ(error_of([] { distance({1}, {1, 2}); }), ErrorCode::kDimMismatch);
}

TEST(LexicalTest, KnownEdits) {
  const PosSeqConfig cfg{10, 5, 1};
  auto swapped = apply_lexical_edit({1, 2, 3}, LexicalEdit::kSwap, 0, 2);
  EXPECT_EQ(swapped, (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(parse_clamped(swapped, cfg), 321);
  auto removed = apply_lexical_edit({5}, LexicalEdit::kRemove, 0, 0);
  EXPECT_TRUE(removed.empty());
  EXPECT_EQ(parse_clamped(removed, cfg), 0);
  auto inserted = apply_lexical_edit({1, 2}, LexicalEdit::kInsert, 1, 7);
  EXPECT_EQ(inserted, (std::vector<int>{1, 7, 2}));
  EXPECT_EQ(parse_clamped(std::vector<int>{9, 9, 9, 9, 9, 9}, cfg), 99999);
}

TEST(LexicalTest, PerturbStaysRepresentable) {
  const PosSeqConfig cfg{10, 3, 2};
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    PositionIndex p{static_cast<long>(rng.below(1000)), static_cast<long>(rng.below(1000))};
    PositionIndex q = lexical_perturb(p, cfg, rng);
    ASSERT_EQ(q.size(), 2u);
    // Only one coordinate is edited.
    EXPECT_TRUE(q[0] == p[0] || q[1] == p[1]);
    for (long c : q.coords) {
      EXPECT_GE(c, 0);
      EXPECT_LT(c, 1000);
    }
  }
}

TEST(ContrastiveSetTest, NearestCandidateExamples) {
  std::vector<PositionIndex> c{{101}, {200}};
  EXPECT_EQ(nearest_candidate({100}, c), 0u);
  // Equal distances resolve to the smaller coordinates.
  std::vector<PositionIndex> tie{{12}, {8}};
  EXPECT_EQ(nearest_candidate({10}, tie), 1u);
}

TEST(ContrastiveSetTest, ForcedSingleUniformCandidateIsPositive) {
  const PosSeqConfig cfg{10, 5, 1};
  const std::vector<long> ext{20000};
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    PositionIndex p = sample_pivot(ext, rng);
    auto set = sample_contrastive_set(p, 8, ext, SamplingStrategy::kGlobal, cfg, rng, 7);
    ASSERT_EQ(set.candidates.size(), 8u);
    if (set.eligible_begin == 7) {
      EXPECT_EQ(set.positive, 7u);
    }
    EXPECT_GE(set.positive, set.eligible_begin);
  }
}

TEST(ContrastiveSetTest, PositiveIsBruteForceArgminAndPivotExcluded) {
  const PosSeqConfig cfg{10, 3, 2};
  Rng rng(13);
  for (int draw = 0; draw < 1000; ++draw) {
    const auto strategy = draw % 2 ? SamplingStrategy::kGlobal : SamplingStrategy::kLocal;
    const std::vector<long> ext{draw % 3 == 0 ? 40L : 900L, draw % 3 == 0 ? 40L : 700L};
    PositionIndex p = sample_pivot(ext, rng);
    auto set = sample_contrastive_set(p, 16, ext, strategy, cfg, rng);
    ASSERT_EQ(set.candidates.size(), 16u);
    std::set<PositionIndex> distinct(set.candidates.begin(), set.candidates.end());
    EXPECT_EQ(distinct.size(), 16u);
    EXPECT_EQ(distinct.count(p), 0u);
    const double best = distance(p, set.candidates[set.positive]);
    EXPECT_GE(set.positive, set.eligible_begin);
    for (std::size_t i = set.eligible_begin; i < set.candidates.size(); ++i) {
      EXPECT_LE(best, distance(p, set.candidates[i]));
    }
    for (const auto& c : set.candidates)
      for (std::size_t d = 0; d < 2; ++d) {
        EXPECT_GE(c[d], 0);
        EXPECT_LT(c[d], 1000);
      }
    if (strategy == SamplingStrategy::kLocal && ext[0] > 256) {
      // All candidates share one window of width 256 per dimension.
      for (std::size_t d = 0; d < 2; ++d) {
        long lo = p[d], hi = p[d];
        for (const auto& c : set.candidates) {
          lo = std::min(lo, c[d]);
          hi = std::max(hi, c[d]);
        }
        EXPECT_LT(hi - lo, 256);
      }
    }
  }
}

TEST(ContrastiveSetTest, MixedUsesBothStrategies) {
  const PosSeqConfig cfg{10, 5, 1};
  const std::vector<long> ext{20000};
  Rng rng(2);
  int lexical = 0;
  for (int i = 0; i < 200; ++i) {
    auto set = sample_contrastive_set(sample_pivot(ext, rng), 8, ext, SamplingStrategy::kMixed, cfg, rng);
    lexical += set.eligible_begin > 0;
  }
  EXPECT_GT(lexical, 60);
  EXPECT_LT(lexical, 140);
}

TEST(ContrastiveSetTest, RegionTooSmall) {
  const PosSeqConfig cfg{10, 5, 1};
  Rng rng(1);
  const std::vector<long> ext{4};
  EXPECT_EQ(error_of([&] { sample_contrastive_set({0}, 4, ext, SamplingStrategy::kLocal, cfg, rng); }),
            ErrorCode::kRegionTooSmall);
}

TEST(OodBatchTest, ShiftBoundsAndDistinctTeachers) {
  const PosSeqConfig cfg{10, 5, 1};
  const TrainRegion region{{512}};
  Rng rng(6);
  long max_z = 0;
  for (int i = 0; i < 2000; ++i) {
    auto s = sample_ood_batch(region, 32, cfg, rng);
    std::set<PositionIndex> t(s.teachers.begin(), s.teachers.end());
    ASSERT_EQ(t.size(), 32u);
    ASSERT_GE(s.shift.z[0], 0);
    ASSERT_LE(s.shift.z[0], 99488);
    max_z = std::max(max_z, s.shift.z[0]);
    for (const auto& p : s.teachers) {
      EXPECT_TRUE(region.contains(p));
      EXPECT_LT(shifted(p, s.shift)[0], cfg.capacity());
    }
  }
  EXPECT_GT(max_z, 90000);
  EXPECT_EQ(error_of([&] { sample_ood_batch(TrainRegion{{4}}, 5, cfg, rng); }), ErrorCode::kRegionTooSmall);
}

TEST(OodBatchTest, ZeroShiftLeavesStudentsEqual) {
  PositionIndex p{3, 4};
  EXPECT_EQ(shifted(p, ShiftVector{{0, 0}}), p);
  EXPECT_EQ(shifted(p, ShiftVector{{2, 1}}), (PositionIndex{5, 5}));
}

TEST(RegionTest, EnumerateIsRowMajor) {
  auto all = enumerate_region(TrainRegion{{2, 3}});
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(all[0], (PositionIndex{0, 0}));
  EXPECT_EQ(all[1], (PositionIndex{0, 1}));
  EXPECT_EQ(all[3], (PositionIndex{1, 0}));
  EXPECT_EQ((TrainRegion{{2, 3}}.size()), 6);
}

TEST(RngTest, SplitStreamsAreReproducible) {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c = Rng(42).split(1), d = Rng(42).split(1), e = Rng(42).split(2);
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(Rng(42).split(1).next_u64(), e.next_u64());
  Rng u(5);
  double mean = 0.0;
  for (int i = 0; i < 20000; ++i) mean += u.uniform();
  EXPECT_NEAR(mean / 20000, 0.5, 0.01);
}

}  // namespace
}  // namespace seqpe
