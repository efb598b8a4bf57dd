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

#include "seqpe/integration.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "seqpe/error.hpp"

namespace seqpe {

AttentionMode parse_attention_mode(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "nope" || s == "none") return AttentionMode::kNope;
  if (s == "sum" || s == "attnsum") return AttentionMode::kAttnSum;
  if (s == "mul" || s == "attnmul") return AttentionMode::kAttnMul;
  if (s == "bias" || s == "attnbias" || s == "scalar" || s == "attnscalar") return AttentionMode::kAttnBias;
  if (s == "rope") return AttentionMode::kRope;
  if (s == "rope2d") return AttentionMode::kRope2d;
  if (s == "alibi") return AttentionMode::kAlibi;
  if (s == "ape" || s == "ape-input") return AttentionMode::kApeInput;
  throw Error(ErrorCode::kUnknownMode, "unknown attention mode '" + std::string(text) + "'");
}

std::string_view attention_mode_name(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kNope: return "nope";
    case AttentionMode::kAttnSum: return "sum";
    case AttentionMode::kAttnMul: return "mul";
    case AttentionMode::kAttnBias: return "bias";
    case AttentionMode::kRope: return "rope";
    case AttentionMode::kRope2d: return "rope2d";
    case AttentionMode::kAlibi: return "alibi";
    case AttentionMode::kApeInput: return "ape";
  }
  throw Error(ErrorCode::kUnknownMode, "unknown attention mode value");
}

PeProjection::PeProjection(std::size_t width, Rng& rng)
    : query(normal_parameter({width, width}, rng)), key(normal_parameter({width, width}, rng)) {}

void PeProjection::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".query", query, true});
  out.push_back({prefix + ".key", key, true});
}

std::pair<Tensor, Tensor> project_pe(const Tensor& embeddings, const PeProjection& proj) {
  if (embeddings.rank() != 2 || embeddings.dim(-1) != proj.query.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "position embeddings " + shape_str(embeddings.shape()) +
                                               " do not match projection width " + std::to_string(proj.query.dim(0)));
  }
  return {matmul(embeddings, proj.query), matmul(embeddings, proj.key)};
}

Tensor attn_scores(const Tensor& q, const Tensor& k, const Tensor& e_q, const Tensor& e_k, AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kNope:
    case AttentionMode::kRope:
    case AttentionMode::kRope2d:
    case AttentionMode::kAlibi:
    case AttentionMode::kApeInput:
      return matmul(q, transpose(k));
    case AttentionMode::kAttnSum:
      return matmul(add(q, e_q), transpose(add(k, e_k)));
    case AttentionMode::kAttnMul:
      return matmul(mul(q, e_q), transpose(mul(k, e_k)));
    case AttentionMode::kAttnBias:
      return add(matmul(q, transpose(k)), matmul(e_q, transpose(e_k)));
  }
  throw Error(ErrorCode::kUnknownMode, "unknown attention mode value");
}

Tensor attention(const Tensor& scores, const Tensor& values, bool causal, const Tensor& bias) {
  const double factor = 1.0 / std::sqrt(static_cast<double>(values.dim(-1)));
  Tensor a = bias.defined() ? add(scores, bias) : scores;
  return matmul(masked_scaled_softmax(a, factor, causal), values);
}

MultiHeadAttention::MultiHeadAttention(std::size_t width, std::size_t heads_, Rng& rng)
    : heads(heads_), query(width, width, rng), key(width, width, rng), value(width, width, rng), out(width, width, rng) {
  if (heads == 0 || width % heads != 0) {
    throw Error(ErrorCode::kHeadMismatch, std::to_string(heads) + " heads do not divide width " + std::to_string(width));
  }
}

Tensor MultiHeadAttention::operator()(const Tensor& x, const AttentionInputs& in) const {
  Tensor q = split_heads(query(x), heads);
  Tensor k = split_heads(key(x), heads);
  Tensor v = split_heads(value(x), heads);
  Tensor eq, ek;
  switch (in.mode) {
    case AttentionMode::kRope:
      q = rope_rotate(q, in.positions, *in.rope);
      k = rope_rotate(k, in.positions, *in.rope);
      break;
    case AttentionMode::kRope2d:
      q = rope2d_rotate(q, in.positions_nd, *in.rope);
      k = rope2d_rotate(k, in.positions_nd, *in.rope);
      break;
    case AttentionMode::kAttnSum:
    case AttentionMode::kAttnMul:
    case AttentionMode::kAttnBias:
      eq = split_heads(in.e_q, heads);
      ek = split_heads(in.e_k, heads);
      break;
    default:
      break;
  }
  Tensor scores = attn_scores(q, k, eq, ek, in.mode);
  Tensor bias = in.mode == AttentionMode::kAlibi ? in.bias : Tensor{};
  return out(merge_heads(attention(scores, v, in.causal, bias)));
}

void MultiHeadAttention::collect(const std::string& prefix, ParameterList& list, bool decay) const {
  query.collect(prefix + ".query", list, decay);
  key.collect(prefix + ".key", list, decay);
  value.collect(prefix + ".value", list, decay);
  out.collect(prefix + ".out", list, decay);
}

TransformerBlock::TransformerBlock(std::size_t width, std::size_t heads, Rng& rng)
    : ln1(width), ln2(width), attn(width, heads, rng), mlp(width, 4, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x, const AttentionInputs& in) const {
  Tensor h = add(x, attn(ln1(x), in));
  return add(h, mlp(ln2(h)));
}

void TransformerBlock::collect(const std::string& prefix, ParameterList& out, bool decay) const {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out, decay);
  ln2.collect(prefix + ".ln2", out);
  mlp.collect(prefix + ".mlp", out, decay);
}

}  // namespace seqpe
