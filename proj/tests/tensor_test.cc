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

#include <cmath>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "seqpe/checkpoint.hpp"
#include "seqpe/error.hpp"
#include "seqpe/grad_check.hpp"
#include "seqpe/optim.hpp"
#include "seqpe/tensor.hpp"
#include "test_util.hpp"

namespace seqpe {
namespace {

using testing::random_tensor;

TEST(MatmulTest, IdentityAndHandArithmetic) {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor c = matmul(eye, b);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{5, 6, 7, 8}));
  Tensor d = matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
  EXPECT_EQ(d.shape(), (Shape{1, 1}));
  EXPECT_EQ(d.data()[0], 11.0);
}

TEST(MatmulTest, ShapeMismatchThrows) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(MatmulTest, MatchesNaiveLoopsAcrossShapes) {
  Rng rng(7);
  // Sizes straddle the register-block widths of the kernel.
  for (std::size_t m : {1, 3, 4, 5, 9}) {
    for (std::size_t k : {1, 7, 16}) {
      for (std::size_t n : {1, 7, 8, 9, 17, 33}) {
        Tensor a = random_tensor({2, m, k}, rng);
        Tensor b = random_tensor({k, n}, rng);
        Tensor c = matmul(a, b);
        for (std::size_t bt = 0; bt < 2; ++bt)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double s = 0.0;
              for (std::size_t t = 0; t < k; ++t) s += a.data()[(bt * m + i) * k + t] * b.data()[t * n + j];
              EXPECT_NEAR(c.data()[(bt * m + i) * n + j], s, 1e-12);
            }
      }
    }
  }
}

TEST(MatmulTest, GradOfSumMatchesOnesTimesBTranspose) {
  Rng rng(3);
  Tensor a = random_tensor({3, 4}, rng, 1.0, true);
  Tensor b = random_tensor({4, 5}, rng);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 4; ++t) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 5; ++j) expect += b.data()[t * 5 + j];
      EXPECT_NEAR(a.grad()[i * 4 + t], expect, 1e-12);
    }
  GradCheckReport r = grad_check([&] { return sum(matmul(a, b)); }, {{"a", a, true}}, {});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(SoftmaxTest, KnownValues) {
  Tensor s = softmax_lastdim(Tensor::from({2}, {0, 0}));
  EXPECT_EQ(s.data()[0], 0.5);
  EXPECT_EQ(s.data()[1], 0.5);
  Tensor big = softmax_lastdim(Tensor::from({2}, {1000, 0}));
  EXPECT_NEAR(big.data()[0], 1.0, 1e-12);
  EXPECT_NEAR(big.data()[1], 0.0, 1e-12);
  Tensor one = softmax_lastdim(Tensor::from({2}, {1, 0}));
  EXPECT_NEAR(one.data()[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(one.data()[0], 0.7310586, 1e-7);
  EXPECT_NEAR(one.data()[1], 0.2689414, 1e-7);
}

TEST(SoftmaxTest, NanPropagates) {
  Tensor s = softmax_lastdim(Tensor::from({2}, {std::nan(""), 0}));
  EXPECT_TRUE(std::isnan(s.data()[0]));
}

TEST(SoftmaxTest, RowsSumToOneAndShiftInvariant) {
  Rng rng(11);
  Tensor x = random_tensor({6, 9}, rng, 3.0);
  Tensor s = softmax_lastdim(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 9; ++j) total += s.data()[r * 9 + j];
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  // Adding the row max first yields the same stabilised input, so the output
  // must agree bit for bit.
  std::vector<double> shifted(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < 6; ++r) {
    double mx = shifted[r * 9];
    for (std::size_t j = 1; j < 9; ++j) mx = std::max(mx, shifted[r * 9 + j]);
    for (std::size_t j = 0; j < 9; ++j) shifted[r * 9 + j] -= mx;
  }
  Tensor s2 = softmax_lastdim(Tensor::from({6, 9}, shifted));
  EXPECT_TRUE(testing::bit_equal(s.data(), s2.data()));
}

TEST(BackwardTest, KnownValues) {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  sum(x).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1}));
  Tensor y = Tensor::from({1}, {2}, true);
  sum(mul(y, y)).backward();
  EXPECT_EQ(y.grad()[0], 4.0);
}

TEST(BackwardTest, NonScalarThrows) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  try {
    scale(x, 2.0).backward();
    FAIL() << "expected NotScalar";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotScalar);
  }
}

TEST(BackwardTest, NoGradGuardBuildsNoGraph) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  Tensor y = sum(mul(x, x));
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradCheckTest, SquareAtThree) {
  Tensor x = Tensor::from({1}, {3.0}, true);
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  GradCheckReport r = grad_check([&] { return sum(square(x)); }, {{"x", x, true}}, opt);
  ASSERT_FALSE(r.entries.empty());
  EXPECT_NEAR(r.entries[0].numeric, 6.0, 1e-8);
  EXPECT_TRUE(r.passed);
}

TEST(GradCheckTest, CrossEntropyPassesAndFlippedSignFails) {
  Rng rng(5);
  Tensor logits = random_tensor({4, 6}, rng, 1.0, true);
  std::vector<int> targets{0, 5, 2, -1};
  auto f = [&] { return cross_entropy(logits, targets); };
  EXPECT_TRUE(grad_check(f, {{"logits", logits, true}}, {}).passed);
  GradCheckOptions flipped;
  flipped.flip_sign = true;
  EXPECT_FALSE(grad_check(f, {{"logits", logits, true}}, flipped).passed);
}

TEST(GradCheckTest, EveryDifferentiableOp) {
  Rng rng(21);
  Tensor a = random_tensor({2, 3, 4}, rng, 1.0, true);
  Tensor b = random_tensor({3, 4}, rng, 1.0, true);
  Tensor w = random_tensor({4, 4}, rng, 1.0, true);
  Tensor g = random_tensor({4}, rng, 1.0, true);
  Tensor bias = random_tensor({4}, rng, 1.0, true);
  Tensor pos = Tensor::from({3}, {0.5, 1.5, 2.0}, true);
  const std::vector<long> ids{2, -1, 0, 1};
  ParameterList params{{"a", a, true}, {"b", b, true}, {"w", w, true},
                       {"g", g, true}, {"bias", bias, true}, {"pos", pos, true}};
  auto f = [&] {
    Tensor x = add(a, b);
    x = sub(mul(x, b), scale(a, 0.3));
    x = layer_norm(x, g, bias);
    x = gelu(matmul(x, w));
    Tensor h = merge_heads(split_heads(x, 2));
    Tensor att = masked_scaled_softmax(matmul(h, transpose(h)), 0.5, true);
    Tensor y = add(matmul(att, h), exp(scale(h, 0.1)));
    Tensor rows = gather_rows(reshape(y, {6, 4}), ids);
    Tensor logits = add_scalar(neg(rows), 0.2);
    Tensor ce = cross_entropy(logits, std::vector<int>{1, 0, 3, -1});
    Tensor extra = mean(square(select_row(y, 1)));
    Tensor lg = sum(log(add_scalar(square(pos), 1.0)));
    Tensor ls = mean(log_softmax_lastdim(mean_rows(y)));
    return add(add(add(ce, extra), lg), add(ls, sum(softmax_lastdim(y))));
  };
  GradCheckOptions opt;
  opt.samples = 120;
  GradCheckReport r = grad_check(f, params, opt);
  EXPECT_GE(r.entries.size(), 100u);
  EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error;
}

TEST(AdamTest, ZeroGradientOnlyDecays) {
  Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  ParameterList params{{"x", x, true}};
  AdamState st = make_adam_state(params, 0.1, 0.5);
  x.mutable_grad();
  adam_step(st, params);
  EXPECT_DOUBLE_EQ(x.data()[0], 1.0 - 0.1 * 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(x.data()[1], -2.0 - 0.1 * 0.5 * -2.0);
  Tensor y = Tensor::from({1}, {3.0}, true);
  ParameterList nodecay{{"y", y, false}};
  AdamState st2 = make_adam_state(nodecay, 0.1, 0.5);
  y.mutable_grad();
  adam_step(st2, nodecay);
  EXPECT_EQ(y.data()[0], 3.0);
}

TEST(AdamTest, FirstStepIsBiasCorrectedUnit) {
  Tensor x = Tensor::from({1}, {0.0}, true);
  ParameterList params{{"x", x, true}};
  AdamState st = make_adam_state(params, 0.1);
  zero_grads(params);
  sum(x).backward();
  adam_step(st, params);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(x.data()[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
  adam_step(st, params);
  EXPECT_EQ(st.step, 2u);
}

TEST(AdamTest, MissingGradThrows) {
  Tensor x = Tensor::from({1}, {0.0}, true);
  ParameterList params{{"x", x, true}};
  AdamState st = make_adam_state(params, 0.1);
  try {
    adam_step(st, params);
    FAIL() << "expected MissingGrad";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingGrad);
  }
}

TEST(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  Rng rng(9);
  Tensor a = random_tensor({3, 5}, rng, 1.0, true);
  Tensor b = random_tensor({7}, rng, 1.0, true);
  ParameterList params{{"a", a, true}, {"b", b, false}};
  const std::string first = encode_container(snapshot_parameters(params, {{"kind", "test"}}, "x = 1"));
  Tensor a2 = Tensor::zeros({3, 5}, true), b2 = Tensor::zeros({7}, true);
  ParameterList loaded{{"a", a2, true}, {"b", b2, false}};
  restore_parameters(decode_container(first), loaded);
  EXPECT_TRUE(testing::bit_equal(a.data(), a2.data()));
  const std::string second = encode_container(snapshot_parameters(loaded, {{"kind", "test"}}, "x = 1"));
  EXPECT_EQ(first, second);

  const auto path = std::filesystem::temp_directory_path() / "seqpe_ckpt_test.bin";
  write_container(path, decode_container(first));
  EXPECT_EQ(encode_container(read_container(path)), first);
  std::filesystem::remove(path);
}

TEST(CheckpointTest, CorruptAndMismatchedInputsThrow) {
  try {
    decode_container("not a container");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
  Tensor a = Tensor::zeros({2}, true);
  Container c = snapshot_parameters({{"a", a, true}}, {}, "");
  Tensor wrong = Tensor::zeros({3}, true);
  try {
    restore_parameters(c, {{"a", wrong, true}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

}  // namespace
}  // namespace seqpe
