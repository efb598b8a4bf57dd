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

#include <span>
#include <vector>

#include "seqpe/positions.hpp"
#include "seqpe/tensor.hpp"

namespace seqpe {

// Sinusoidal table: row pos = [sin(pos w_0), cos(pos w_0), sin(pos w_1), ...]
// with w_i = 10000^(-2i/d). Throws OddWidth for odd d.
Tensor ape_sinusoidal(std::size_t length, std::size_t width);
// Same formula at arbitrary (possibly shifted) positions.
Tensor sinusoidal_rows(std::span<const long> positions, std::size_t width);
// 2D variant: first half encodes coordinate 0, second half coordinate 1.
// Width must be divisible by 4.
Tensor sinusoidal_rows_2d(std::span<const PositionIndex> positions, std::size_t width);

// Learned absolute table with a fixed row count equal to the training extent.
struct ApeLearnTable {
  Tensor table;  // [L_train, d] (1D) or [H*W, d] (2D, row-major grid)
  std::vector<long> extent;  // {L_train} or {H, W}
};

// Interpolation weights [out, in]: out <= in copies the first rows; out > in
// samples `in` rows at `out` evenly spaced points with endpoints aligned.
std::vector<double> interpolation_matrix(std::size_t in, std::size_t out);

// L_eval rows of a 1D table, linearly interpolated when L_eval > L_train.
Tensor ape_learned_interpolated(const ApeLearnTable& table, std::size_t eval_length);
// h x w grid of a 2D table, separable linear interpolation per axis.
Tensor ape_learned_interpolated_2d(const ApeLearnTable& table, std::size_t rows, std::size_t cols);

struct RopeParams {
  double base = 1e4;
  std::vector<double> freqs;  // theta_t = base^(-2t/d), t in [0, d/2)
};

RopeParams make_rope_params(double base, std::size_t width);

// Rotates coordinate pairs (2t, 2t+1) of x[.., L, d] by angles[l * d/2 + t].
// Differentiable in x.
Tensor rotate_pairs(const Tensor& x, std::vector<double> angles);

// Pair t of row l rotated by positions[l] * theta_t. Position 0 is identity.
Tensor rope_rotate(const Tensor& x, std::span<const long> positions, const RopeParams& params);
// Axial 2D rotary: the first d/2 coordinates rotate with coordinate 0, the
// last d/2 with coordinate 1, each using `params` built at width d/2.
// Throws BadWidth unless d is divisible by 4.
Tensor rope2d_rotate(const Tensor& x, std::span<const PositionIndex> positions, const RopeParams& params);

// Geometric head slopes m_h = 2^(-8(h+1)/H).
std::vector<double> alibi_slopes(std::size_t heads);
// [heads, L, L]: -m_h (i - j) for i >= j, -inf above the diagonal.
Tensor alibi_bias(std::size_t length, std::size_t heads);
// Same, with i and j replaced by the supplied (possibly shifted) positions.
Tensor alibi_bias_at(std::span<const long> positions, std::size_t heads);

}  // namespace seqpe
