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

#include "seqpe/pe_provider.hpp"

#include <algorithm>
#include <cctype>

#include "seqpe/error.hpp"

namespace seqpe {

PeKind parse_pe_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "nope") return PeKind::kNope;
  if (s == "ape-sin") return PeKind::kApeSin;
  if (s == "ape-learn") return PeKind::kApeLearn;
  if (s == "rope") return PeKind::kRope;
  if (s == "rope2d") return PeKind::kRope2d;
  if (s == "alibi") return PeKind::kAlibi;
  if (s == "seqpe") return PeKind::kSeqPE;
  throw Error(ErrorCode::kUnknownMode, "unknown position encoding '" + std::string(text) + "'");
}

std::string_view pe_kind_name(PeKind kind) {
  switch (kind) {
    case PeKind::kNope: return "nope";
    case PeKind::kApeSin: return "ape-sin";
    case PeKind::kApeLearn: return "ape-learn";
    case PeKind::kRope: return "rope";
    case PeKind::kRope2d: return "rope2d";
    case PeKind::kAlibi: return "alibi";
    case PeKind::kSeqPE: return "seqpe";
  }
  throw Error(ErrorCode::kUnknownMode, "unknown position encoding value");
}

std::vector<PositionIndex> grid_positions(std::span<const long> extent) {
  std::vector<PositionIndex> out;
  if (extent.size() == 1) {
    for (long i = 0; i < extent[0]; ++i) out.push_back({i});
  } else if (extent.size() == 2) {
    for (long r = 0; r < extent[0]; ++r)
      for (long c = 0; c < extent[1]; ++c) out.push_back({r, c});
  } else {
    throw Error(ErrorCode::kDimMismatch, "extent must have 1 or 2 dimensions");
  }
  return out;
}

AttentionInputs PeProvider::Context::layer(std::size_t l) const {
  AttentionInputs in;
  in.mode = mode_;
  in.causal = causal_;
  if (!eq_.empty()) {
    const std::size_t i = eq_.size() == 1 ? 0 : l;
    in.e_q = eq_.at(i);
    in.e_k = ek_.at(i);
  }
  in.rope = rope_;
  in.positions = pos1_;
  in.positions_nd = posn_;
  in.bias = bias_;
  return in;
}

PeProvider::PeProvider(const PeConfig& cfg, Rng& rng) : cfg_(cfg) {
  const std::size_t dims = cfg_.train_extent.size();
  if (dims != 1 && dims != 2) throw Error(ErrorCode::kConfigInvalid, "train extent must have 1 or 2 dimensions");
  if (cfg_.heads == 0 || cfg_.width % cfg_.heads != 0)
    throw Error(ErrorCode::kHeadMismatch, "model heads do not divide width");
  const std::size_t head_width = cfg_.width / cfg_.heads;
  switch (cfg_.kind) {
    case PeKind::kNope:
      break;
    case PeKind::kApeSin:
      if (cfg_.width % (2 * dims) != 0) throw Error(ErrorCode::kBadWidth, "sinusoidal width");
      break;
    case PeKind::kApeLearn: {
      long rows = 1;
      for (long e : cfg_.train_extent) rows *= e;
      ape_.table = normal_parameter({static_cast<std::size_t>(rows), cfg_.width}, rng);
      ape_.extent = cfg_.train_extent;
      break;
    }
    case PeKind::kRope:
      if (dims != 1) throw Error(ErrorCode::kConfigInvalid, "rope is one-dimensional; use rope2d");
      rope_ = make_rope_params(cfg_.rope_base, head_width);
      break;
    case PeKind::kRope2d:
      if (dims != 2) throw Error(ErrorCode::kConfigInvalid, "rope2d needs a two-dimensional extent");
      if (head_width % 4 != 0) throw Error(ErrorCode::kBadWidth, "rope2d head width must be divisible by 4");
      rope_ = make_rope_params(cfg_.rope_base, head_width / 2);
      break;
    case PeKind::kAlibi:
      if (dims != 1) throw Error(ErrorCode::kConfigInvalid, "alibi is one-dimensional");
      if (!cfg_.causal) throw Error(ErrorCode::kConfigInvalid, "alibi bias is defined for causal attention");
      break;
    case PeKind::kSeqPE: {
      if (cfg_.encoder.width != cfg_.width)
        throw Error(ErrorCode::kConfigInvalid, "encoder width must equal model width");
      if (static_cast<std::size_t>(cfg_.encoder.seq.dims) != dims)
        throw Error(ErrorCode::kConfigInvalid, "encoder dims must match the train extent rank");
      if (cfg_.fusion != AttentionMode::kAttnSum && cfg_.fusion != AttentionMode::kAttnMul &&
          cfg_.fusion != AttentionMode::kAttnBias)
        throw Error(ErrorCode::kUnknownMode, "seqpe fusion must be sum, mul or bias");
      encoder_ = SeqPEEncoder(cfg_.encoder, rng);
      const std::size_t n = cfg_.share_projection ? 1 : cfg_.model_layers;
      for (std::size_t i = 0; i < n; ++i) projections_.emplace_back(cfg_.width, rng);
      break;
    }
  }
}

std::unique_ptr<PeProvider::Context> PeProvider::prepare(std::span<const PositionIndex> positions,
                                                         std::span<const long> extent) const {
  auto ctx = std::make_unique<Context>();
  ctx->causal_ = cfg_.causal;
  const std::size_t dims = cfg_.train_extent.size();
  if (extent.size() != dims) throw Error(ErrorCode::kDimMismatch, "extent rank does not match the model");
  for (const auto& p : positions)
    if (p.size() != dims) throw Error(ErrorCode::kDimMismatch, "position rank does not match the model");
  if (dims == 1) {
    for (const auto& p : positions) ctx->pos1_.push_back(p[0]);
  } else {
    ctx->posn_.assign(positions.begin(), positions.end());
  }
  switch (cfg_.kind) {
    case PeKind::kNope:
      ctx->mode_ = AttentionMode::kNope;
      break;
    case PeKind::kApeSin:
      ctx->mode_ = AttentionMode::kApeInput;
      ctx->input_ = dims == 1 ? sinusoidal_rows(ctx->pos1_, cfg_.width) : sinusoidal_rows_2d(ctx->posn_, cfg_.width);
      break;
    case PeKind::kApeLearn: {
      ctx->mode_ = AttentionMode::kApeInput;
      for (std::size_t i = 0; i < dims; ++i)
        if (extent[i] > cfg_.train_extent[i] && !cfg_.interpolate)
          throw Error(ErrorCode::kUnsupportedExtent, "learned table cannot cover extent beyond training");
      ctx->input_ = dims == 1 ? ape_learned_interpolated(ape_, static_cast<std::size_t>(extent[0]))
                              : ape_learned_interpolated_2d(ape_, static_cast<std::size_t>(extent[0]),
                                                            static_cast<std::size_t>(extent[1]));
      break;
    }
    case PeKind::kRope:
      ctx->mode_ = AttentionMode::kRope;
      ctx->rope_ = &rope_;
      break;
    case PeKind::kRope2d:
      ctx->mode_ = AttentionMode::kRope2d;
      ctx->rope_ = &rope_;
      break;
    case PeKind::kAlibi:
      ctx->mode_ = AttentionMode::kAlibi;
      ctx->bias_ = alibi_bias_at(ctx->pos1_, cfg_.heads);
      break;
    case PeKind::kSeqPE: {
      ctx->mode_ = cfg_.fusion;
      ctx->embeddings_ = table_ ? table_->lookup_batch(positions) : encoder_.encode_batch(positions);
      for (const auto& proj : projections_) {
        auto [eq, ek] = project_pe(ctx->embeddings_, proj);
        ctx->eq_.push_back(eq);
        ctx->ek_.push_back(ek);
      }
      break;
    }
  }
  return ctx;
}

void PeProvider::collect(ParameterList& out) const {
  switch (cfg_.kind) {
    case PeKind::kApeLearn:
      out.push_back({"pe.ape", ape_.table, true});
      break;
    case PeKind::kSeqPE:
      encoder_.collect(out);
      for (std::size_t i = 0; i < projections_.size(); ++i)
        projections_[i].collect("pe.proj" + std::to_string(i), out);
      break;
    default:
      break;
  }
}

}  // namespace seqpe
