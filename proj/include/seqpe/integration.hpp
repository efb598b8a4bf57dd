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
#include <string>
#include <string_view>
#include <utility>

#include "seqpe/baseline_pe.hpp"
#include "seqpe/nn.hpp"

namespace seqpe {

// How positional information enters attention.
//   kAttnSum:  (q + e^q)^T (k + e^k)
//   kAttnMul:  (q * e^q)^T (k * e^k)      (Hadamard)
//   kAttnBias: q^T k + e^q^T e^k
// kRope/kRope2d rotate q and k, kAlibi adds a distance bias, kApeInput adds
// embeddings to the input only, kNope does nothing.
enum class AttentionMode { kNope, kAttnSum, kAttnMul, kAttnBias, kRope, kRope2d, kAlibi, kApeInput };

// Accepts "nope", "sum"/"attnsum", "mul"/"attnmul", "bias"/"attnbias", and
// "scalar"/"attnscalar" (mapped to kAttnBias). Case-insensitive.
AttentionMode parse_attention_mode(std::string_view text);
std::string_view attention_mode_name(AttentionMode mode);

// The W_PE^{q,k} pair mapping position embeddings to query/key space.
struct PeProjection {
  Tensor query;  // [d, d]
  Tensor key;    // [d, d]

  PeProjection() = default;
  PeProjection(std::size_t width, Rng& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

// (E W^q, E W^k).
std::pair<Tensor, Tensor> project_pe(const Tensor& embeddings, const PeProjection& proj);

// Unnormalised scores [.., L, L] from q, k [.., L, d_head]. e_q/e_k may be
// undefined for modes that do not use them; they broadcast over leading
// batch dims of q/k.
Tensor attn_scores(const Tensor& q, const Tensor& k, const Tensor& e_q, const Tensor& e_k, AttentionMode mode);

// softmax((A + bias) / sqrt(d_head)) V over allowed keys. `causal` excludes
// j > i. bias (e.g. ALiBi) broadcasts over leading dims.
Tensor attention(const Tensor& scores, const Tensor& values, bool causal, const Tensor& bias = {});

// Per-call positional inputs for one attention layer.
struct AttentionInputs {
  AttentionMode mode = AttentionMode::kNope;
  bool causal = true;
  Tensor e_q;  // [L, d] projected position embeddings (score-fusion modes)
  Tensor e_k;
  const RopeParams* rope = nullptr;
  std::span<const long> positions;           // kRope, kAlibi
  std::span<const PositionIndex> positions_nd;  // kRope2d
  Tensor bias;  // [heads, L, L] for kAlibi
};

struct MultiHeadAttention {
  std::size_t heads = 1;
  Linear query, key, value, out;

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t width, std::size_t heads, Rng& rng);
  Tensor operator()(const Tensor& x, const AttentionInputs& in) const;
  void collect(const std::string& prefix, ParameterList& out, bool decay = true) const;
};

// Pre-layer-norm block: x + attn(ln1(x)), then x + mlp(ln2(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Mlp mlp;

  TransformerBlock() = default;
  TransformerBlock(std::size_t width, std::size_t heads, Rng& rng);
  Tensor operator()(const Tensor& x, const AttentionInputs& in) const;
  void collect(const std::string& prefix, ParameterList& out, bool decay = true) const;
};

}  // namespace seqpe
