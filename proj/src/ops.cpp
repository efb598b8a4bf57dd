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
#include <limits>
#include <numbers>

#include "seqpe/error.hpp"
#include "seqpe/tensor.hpp"

namespace seqpe {

namespace {

using detail::Node;

// Gradient buffer of an op input, or nullptr when it does not need one.
double* grad_ptr(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  Node* n = t.node();
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  return n->grad.data();
}

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct Broadcast {
  bool a_is_big;
  std::size_t outer;
  std::size_t inner;
  Shape shape;
};

Broadcast broadcast_shapes(const Tensor& a, const Tensor& b, const char* op) {
  if (is_suffix(b.shape(), a.shape())) {
    return {true, a.numel() / b.numel(), b.numel(), a.shape()};
  }
  if (is_suffix(a.shape(), b.shape())) {
    return {false, b.numel() / a.numel(), a.numel(), b.shape()};
  }
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": cannot broadcast " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
}

// C[M,N] (+)= A[M,K] B[K,N], register-blocked. Every output element is summed
// over ascending k from 0 (or its prior value) whichever block it lands in,
// so a row's result does not depend on M.
constexpr std::size_t kBlockRows = 4;

typedef double Vec8 __attribute__((vector_size(64), aligned(8), may_alias));

inline Vec8 load8(const double* p) { return *reinterpret_cast<const Vec8*>(p); }
inline void store8(double* p, Vec8 v) { *reinterpret_cast<Vec8*>(p) = v; }

// R rows by V*8 columns held in registers across the whole k loop.
template <std::size_t R, std::size_t V>
void gemm_tile(const double* a, const double* b, double* c, std::size_t k, std::size_t n, bool accumulate) {
  Vec8 acc[R][V];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = accumulate ? load8(c + r * n + 8 * v) : Vec8{};
  for (std::size_t p = 0; p < k; ++p) {
    Vec8 bv[V];
    for (std::size_t v = 0; v < V; ++v) bv[v] = load8(b + p * n + 8 * v);
    for (std::size_t r = 0; r < R; ++r) {
      const double av = a[r * k + p];
      for (std::size_t v = 0; v < V; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < V; ++v) store8(c + r * n + 8 * v, acc[r][v]);
}

template <std::size_t R>
void gemm_tail(const double* a, const double* b, double* c, std::size_t k, std::size_t n, std::size_t w,
               bool accumulate) {
  double acc[R][8];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < w; ++j) acc[r][j] = accumulate ? c[r * n + j] : 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t r = 0; r < R; ++r) {
      const double av = a[r * k + p];
      for (std::size_t j = 0; j < w; ++j) acc[r][j] += av * b[p * n + j];
    }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < w; ++j) c[r * n + j] = acc[r][j];
}

template <std::size_t R>
void gemm_rows(const double* a, const double* b, double* c, std::size_t k, std::size_t n, bool accumulate) {
  std::size_t j0 = 0;
  for (; j0 + 16 <= n; j0 += 16) gemm_tile<R, 2>(a, b + j0, c + j0, k, n, accumulate);
  for (; j0 + 8 <= n; j0 += 8) gemm_tile<R, 1>(a, b + j0, c + j0, k, n, accumulate);
  if (j0 < n) gemm_tail<R>(a, b + j0, c + j0, k, n, n - j0, accumulate);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  std::size_t i = 0;
  for (; i + kBlockRows <= m; i += kBlockRows) gemm_rows<kBlockRows>(a + i * k, b, c + i * n, k, n, accumulate);
  for (; i < m; ++i) gemm_rows<1>(a + i * k, b, c + i * n, k, n, accumulate);
}

void transpose_into(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd dfdx) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return make_result(a.shape(), std::move(out), {a}, [a, dfdx](const Node& self) {
    double* ga = grad_ptr(a);
    if (!ga) return;
    auto x = a.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * dfdx(x[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Broadcast bc = broadcast_shapes(a, b, "add");
  const Tensor& big = bc.a_is_big ? a : b;
  const Tensor& small = bc.a_is_big ? b : a;
  std::vector<double> out(big.data().begin(), big.data().end());
  auto s = small.data();
  for (std::size_t o = 0; o < bc.outer; ++o) {
    double* row = out.data() + o * bc.inner;
    for (std::size_t i = 0; i < bc.inner; ++i) row[i] += s[i];
  }
  return make_result(bc.shape, std::move(out), {a, b}, [big, small, bc](const Node& self) {
    const auto& g = self.grad;
    if (double* gb = grad_ptr(big)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
    if (double* gs = grad_ptr(small)) {
      for (std::size_t o = 0; o < bc.outer; ++o)
        for (std::size_t i = 0; i < bc.inner; ++i) gs[i] += g[o * bc.inner + i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  Broadcast bc = broadcast_shapes(a, b, "mul");
  const Tensor& big = bc.a_is_big ? a : b;
  const Tensor& small = bc.a_is_big ? b : a;
  std::vector<double> out(big.numel());
  auto x = big.data();
  auto s = small.data();
  for (std::size_t o = 0; o < bc.outer; ++o)
    for (std::size_t i = 0; i < bc.inner; ++i) out[o * bc.inner + i] = x[o * bc.inner + i] * s[i];
  return make_result(bc.shape, std::move(out), {a, b}, [big, small, bc](const Node& self) {
    const auto& g = self.grad;
    auto x = big.data();
    auto s = small.data();
    if (double* gb = grad_ptr(big)) {
      for (std::size_t o = 0; o < bc.outer; ++o)
        for (std::size_t i = 0; i < bc.inner; ++i) gb[o * bc.inner + i] += g[o * bc.inner + i] * s[i];
    }
    if (double* gs = grad_ptr(small)) {
      for (std::size_t o = 0; o < bc.outer; ++o)
        for (std::size_t i = 0; i < bc.inner; ++i) gs[i] += g[o * bc.inner + i] * x[o * bc.inner + i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 2 && b.rank() >= 2, ErrorCode::kShapeMismatch, "matmul needs rank >= 2 operands");
  const std::size_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  if (b.dim(-2) != k) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul inner dims differ: " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  }
  Shape ba(a.shape().begin(), a.shape().end() - 2);
  Shape bb(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  if (is_suffix(bb, ba)) {
    batch = ba;
  } else if (is_suffix(ba, bb)) {
    batch = bb;
  } else {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul batch dims not broadcastable: " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  }
  const std::size_t na = shape_numel(ba), nb = shape_numel(bb), nbatch = shape_numel(batch);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(nbatch * m * n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  // A shared right operand lets the whole batch run as one taller product.
  const bool flat = nb == 1 && na == nbatch;
  if (flat) {
    gemm_nn(pa, pb, out.data(), nbatch * m, k, n, false);
  } else {
    for (std::size_t t = 0; t < nbatch; ++t)
      gemm_nn(pa + (t % na) * m * k, pb + (t % nb) * k * n, out.data() + t * m * n, m, k, n, false);
  }
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [a, b, m, k, n, na, nb, nbatch, flat](const Node& self) {
                       const double* g = self.grad.data();
                       const double* pa = a.data().data();
                       const double* pb = b.data().data();
                       const std::size_t rows = flat ? nbatch * m : m;
                       const std::size_t steps = flat ? 1 : nbatch;
                       if (double* ga = grad_ptr(a)) {
                         std::vector<double> bt(k * n);
                         for (std::size_t t = 0; t < steps; ++t) {
                           transpose_into(pb + (t % nb) * k * n, bt.data(), k, n);
                           gemm_nn(g + t * m * n, bt.data(), ga + (t % na) * m * k, rows, n, k, true);
                         }
                       }
                       if (double* gb = grad_ptr(b)) {
                         std::vector<double> at(rows * k);
                         for (std::size_t t = 0; t < steps; ++t) {
                           transpose_into(pa + (t % na) * m * k, at.data(), rows, k);
                           gemm_nn(at.data(), g + t * m * n, gb + (t % nb) * k * n, k, rows, n, true);
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() >= 2, ErrorCode::kShapeMismatch, "transpose needs rank >= 2");
  const std::size_t r = a.dim(-2), c = a.dim(-1), batch = a.numel() / (r * c);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(a.numel());
  for (std::size_t t = 0; t < batch; ++t) transpose_into(a.data().data() + t * r * c, out.data() + t * r * c, r, c);
  return make_result(std::move(shape), std::move(out), {a}, [a, r, c, batch](const Node& self) {
    double* ga = grad_ptr(a);
    if (!ga) return;
    for (std::size_t t = 0; t < batch; ++t) {
      const double* g = self.grad.data() + t * r * c;
      double* dst = ga + t * r * c;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += g[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [a](const Node& self) {
    if (double* ga = grad_ptr(a)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
  });
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  require(x.rank() >= 2, ErrorCode::kShapeMismatch, "split_heads needs rank >= 2");
  const std::size_t len = x.dim(-2), width = x.dim(-1);
  if (heads == 0 || width % heads != 0) {
    throw Error(ErrorCode::kHeadMismatch,
                std::to_string(heads) + " heads do not divide width " + std::to_string(width));
  }
  const std::size_t dh = width / heads, batch = x.numel() / (len * width);
  Shape shape(x.shape().begin(), x.shape().end() - 2);
  shape.insert(shape.end(), {heads, len, dh});
  std::vector<double> out(x.numel());
  const double* src = x.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < len; ++l)
        std::copy_n(src + (b * len + l) * width + h * dh, dh, out.data() + ((b * heads + h) * len + l) * dh);
  return make_result(std::move(shape), std::move(out), {x}, [x, heads, len, dh, width, batch](const Node& self) {
    double* gx = grad_ptr(x);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t l = 0; l < len; ++l) {
          const double* g = self.grad.data() + ((b * heads + h) * len + l) * dh;
          double* dst = gx + (b * len + l) * width + h * dh;
          for (std::size_t j = 0; j < dh; ++j) dst[j] += g[j];
        }
  });
}

Tensor merge_heads(const Tensor& x) {
  require(x.rank() >= 3, ErrorCode::kShapeMismatch, "merge_heads needs rank >= 3");
  const std::size_t heads = x.dim(-3), len = x.dim(-2), dh = x.dim(-1);
  const std::size_t width = heads * dh, batch = x.numel() / (heads * len * dh);
  Shape shape(x.shape().begin(), x.shape().end() - 3);
  shape.insert(shape.end(), {len, width});
  std::vector<double> out(x.numel());
  const double* src = x.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < len; ++l)
        std::copy_n(src + ((b * heads + h) * len + l) * dh, dh, out.data() + (b * len + l) * width + h * dh);
  return make_result(std::move(shape), std::move(out), {x}, [x, heads, len, dh, width, batch](const Node& self) {
    double* gx = grad_ptr(x);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t l = 0; l < len; ++l) {
          const double* g = self.grad.data() + (b * len + l) * width + h * dh;
          double* dst = gx + ((b * heads + h) * len + l) * dh;
          for (std::size_t j = 0; j < dh; ++j) dst[j] += g[j];
        }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const long> ids) {
  require(table.rank() == 2, ErrorCode::kShapeMismatch, "gather_rows needs a rank-2 table");
  require(!ids.empty(), ErrorCode::kShapeMismatch, "gather_rows with no ids");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  std::vector<long> idx(ids.begin(), ids.end());
  for (long id : idx) {
    if (id >= static_cast<long>(rows)) {
      throw Error(ErrorCode::kBadToken, "row " + std::to_string(id) + " >= table rows " + std::to_string(rows));
    }
  }
  std::vector<double> out(idx.size() * width, 0.0);
  const double* src = table.data().data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= 0) std::copy_n(src + static_cast<std::size_t>(idx[r]) * width, width, out.data() + r * width);
  }
  Shape shape{idx.size(), width};
  return make_result(std::move(shape), std::move(out), {table}, [table, idx = std::move(idx), width](const Node& self) {
    double* gt = grad_ptr(table);
    if (!gt) return;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0) continue;
      double* dst = gt + static_cast<std::size_t>(idx[r]) * width;
      const double* g = self.grad.data() + r * width;
      for (std::size_t j = 0; j < width; ++j) dst[j] += g[j];
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result({1}, {s}, {a}, [a](const Node& self) {
    double* ga = grad_ptr(a);
    if (!ga) return;
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean_rows(const Tensor& a) {
  require(a.rank() >= 2, ErrorCode::kShapeMismatch, "mean_rows needs rank >= 2");
  const std::size_t len = a.dim(-2), width = a.dim(-1), batch = a.numel() / (len * width);
  Shape shape(a.shape().begin(), a.shape().end() - 2);
  shape.push_back(width);
  std::vector<double> out(batch * width, 0.0);
  const double* src = a.data().data();
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t j = 0; j < width; ++j) out[b * width + j] += src[(b * len + l) * width + j];
    for (std::size_t j = 0; j < width; ++j) out[b * width + j] *= inv;
  }
  return make_result(std::move(shape), std::move(out), {a}, [a, len, width, batch, inv](const Node& self) {
    double* ga = grad_ptr(a);
    if (!ga) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t j = 0; j < width; ++j) ga[(b * len + l) * width + j] += self.grad[b * width + j] * inv;
  });
}

Tensor select_row(const Tensor& a, std::size_t row) {
  require(a.rank() >= 2, ErrorCode::kShapeMismatch, "select_row needs rank >= 2");
  const std::size_t len = a.dim(-2), width = a.dim(-1), batch = a.numel() / (len * width);
  if (row >= len) throw Error(ErrorCode::kOutOfRange, "select_row index out of range");
  Shape shape(a.shape().begin(), a.shape().end() - 2);
  shape.push_back(width);
  std::vector<double> out(batch * width);
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(a.data().data() + (b * len + row) * width, width, out.data() + b * width);
  return make_result(std::move(shape), std::move(out), {a}, [a, row, len, width, batch](const Node& self) {
    double* ga = grad_ptr(a);
    if (!ga) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j) ga[(b * len + row) * width + j] += self.grad[b * width + j];
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.dim(-1), rows = x.numel() / n;
  std::vector<double> out(x.numel());
  const double* src = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src + r * n;
    double* o = out.data() + r * n;
    double mx = in[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return make_result(x.shape(), std::move(out), {x}, [x, n, rows](const Node& self) {
    double* gx = grad_ptr(x);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.dim(-1), rows = x.numel() / n;
  std::vector<double> out(x.numel());
  const double* src = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src + r * n;
    double mx = in[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = in[j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x}, [x, n, rows](const Node& self) {
    double* gx = grad_ptr(x);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += g[j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[j] - std::exp(y[j]) * gsum;
    }
  });
}

Tensor masked_scaled_softmax(const Tensor& x, double factor, bool causal) {
  require(x.rank() >= 2, ErrorCode::kShapeMismatch, "masked_scaled_softmax needs rank >= 2");
  const std::size_t rows_per = x.dim(-2), n = x.dim(-1), rows = x.numel() / n;
  if (causal && rows_per != n) throw Error(ErrorCode::kShapeMismatch, "causal mask needs square scores");
  std::vector<double> out(x.numel(), 0.0);
  const double* src = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t limit = causal ? (r % rows_per) + 1 : n;
    const double* in = src + r * n;
    double* o = out.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, factor * in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < limit; ++j) total += (o[j] = std::exp(factor * in[j] - mx));
    for (std::size_t j = 0; j < limit; ++j) o[j] /= total;
  }
  return make_result(x.shape(), std::move(out), {x}, [x, n, rows, rows_per, causal, factor](const Node& self) {
    double* gx = grad_ptr(x);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t limit = causal ? (r % rows_per) + 1 : n;
      const double* y = self.data.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < limit; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < limit; ++j) gx[r * n + j] += factor * y[j] * (g[j] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require(logits.rank() == 2, ErrorCode::kShapeMismatch, "cross_entropy needs [N, C] logits");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != rows) throw Error(ErrorCode::kShapeMismatch, "cross_entropy target count mismatch");
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> probs(logits.numel());
  double total = 0.0;
  std::size_t counted = 0;
  const double* src = logits.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src + r * classes;
    double* p = probs.data() + r * classes;
    double mx = in[0];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += (p[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < classes; ++j) p[j] /= z;
    if (tgt[r] < 0) continue;
    if (static_cast<std::size_t>(tgt[r]) >= classes) throw Error(ErrorCode::kBadToken, "target out of range");
    total += -(in[tgt[r]] - mx - std::log(z));
    ++counted;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  return make_result({1}, {total / denom}, {logits},
                     [logits, tgt = std::move(tgt), probs = std::move(probs), rows, classes, denom](const Node& self) {
                       double* gl = grad_ptr(logits);
                       if (!gl) return;
                       const double g = self.grad[0] / denom;
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (tgt[r] < 0) continue;
                         const double* p = probs.data() + r * classes;
                         double* dst = gl + r * classes;
                         for (std::size_t j = 0; j < classes; ++j) dst[j] += g * p[j];
                         dst[tgt[r]] -= g;
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.dim(-1), rows = x.numel() / n;
  if (gain.numel() != n || bias.numel() != n) throw Error(ErrorCode::kShapeMismatch, "layer_norm parameter width");
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const double* src = x.data().data();
  const double* gp = gain.data().data();
  const double* bp = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (in[j] - mu) * is;
      xhat[r * n + j] = h;
      out[r * n + j] = h * gp[j] + bp[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [x, gain, bias, n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self) {
                       double* gx = grad_ptr(x);
                       double* gg = grad_ptr(gain);
                       double* gb = grad_ptr(bias);
                       const double* gp = gain.data().data();
                       std::vector<double> dh(n);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* g = self.grad.data() + r * n;
                         const double* h = xhat.data() + r * n;
                         if (gg)
                           for (std::size_t j = 0; j < n; ++j) gg[j] += g[j] * h[j];
                         if (gb)
                           for (std::size_t j = 0; j < n; ++j) gb[j] += g[j];
                         if (!gx) continue;
                         double mean_dh = 0.0, mean_dh_h = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           dh[j] = g[j] * gp[j];
                           mean_dh += dh[j];
                           mean_dh_h += dh[j] * h[j];
                         }
                         mean_dh /= static_cast<double>(n);
                         mean_dh_h /= static_cast<double>(n);
                         for (std::size_t j = 0; j < n; ++j)
                           gx[r * n + j] += inv_std[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                       }
                     });
}

Tensor gelu(const Tensor& x) {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + 0.044715 * v * v * v))); },
      [](double v, double) {
        const double u = kC * (v + 0.044715 * v * v * v);
        const double t = std::tanh(u);
        const double du = kC * (1.0 + 3.0 * 0.044715 * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
}

}  // namespace seqpe
