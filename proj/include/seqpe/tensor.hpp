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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seqpe {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const Node&)> backward;
};

}  // namespace detail

// Dense row-major float64 array with optional reverse-mode gradient tracking.
//
// Tensor is a handle: copies share storage and graph identity. Ops build a
// graph of parents while grad mode is enabled; Tensor::backward() walks it in
// reverse topological order. The graph is released with the last handle.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  // Negative indices count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(this)/d(this) = 1 and accumulates into every reachable leaf.
  // Repeated calls accumulate additively into leaves.
  void backward() const;

  // Same data, cut from the graph.
  Tensor detach() const;
  Tensor clone() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::initializer_list<Tensor>,
                            std::function<void(const detail::Node&)>);
};

bool grad_enabled();

// Disables graph construction on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op output. When grad mode is on and any input requires grad, the
// output records the inputs as parents and keeps `backward`.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                   std::function<void(const detail::Node&)> backward);

// ---------------------------------------------------------------------------
// Ops. Binary elementwise ops broadcast when one shape is a trailing suffix of
// the other (bias rows, per-head tables shared across a batch).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

// [.., M, K] @ [.., K, N]. Batch dims broadcast when one side's batch dims
// are a suffix of the other's (a rank-2 operand broadcasts over any batch).
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two dims.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// [.., L, d] -> [.., h, L, d/h] (contiguous column blocks per head).
Tensor split_heads(const Tensor& x, std::size_t heads);
// Inverse of split_heads.
Tensor merge_heads(const Tensor& x);

// Row lookup: output row r = table[ids[r]], or zeros when ids[r] < 0.
Tensor gather_rows(const Tensor& table, std::span<const long> ids);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over dim -2: [.., L, d] -> [.., d].
Tensor mean_rows(const Tensor& a);
// Picks index `row` along dim -2: [.., L, d] -> [.., d].
Tensor select_row(const Tensor& a, std::size_t row);

// Softmax over the last dim with max-subtraction. NaN inputs propagate.
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
// softmax(factor * x) over the last dim of [.., L, L]; with `causal`, entries
// j > i are excluded. Fused so masked entries carry exactly zero gradient.
Tensor masked_scaled_softmax(const Tensor& x, double factor, bool causal);

// Mean negative log-likelihood of `targets` under softmax(logits).
// logits: [N, C]. Targets < 0 are ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// tanh approximation.
Tensor gelu(const Tensor& x);

}  // namespace seqpe
