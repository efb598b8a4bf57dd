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

#include "seqpe/baseline_pe.hpp"

#include <cmath>
#include <limits>

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

void fill_sinusoid(double* row, double pos, std::size_t width) {
  for (std::size_t i = 0; i < width / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(width));
    row[2 * i] = std::sin(pos * w);
    row[2 * i + 1] = std::cos(pos * w);
  }
}

}  // namespace

Tensor ape_sinusoidal(std::size_t length, std::size_t width) {
  std::vector<long> pos(length);
  for (std::size_t i = 0; i < length; ++i) pos[i] = static_cast<long>(i);
  return sinusoidal_rows(pos, width);
}

Tensor sinusoidal_rows(std::span<const long> positions, std::size_t width) {
  if (width % 2 != 0) throw Error(ErrorCode::kOddWidth, "sinusoidal width " + std::to_string(width));
  std::vector<double> out(positions.size() * width);
  for (std::size_t r = 0; r < positions.size(); ++r)
    fill_sinusoid(out.data() + r * width, static_cast<double>(positions[r]), width);
  return Tensor::from({positions.size(), width}, std::move(out));
}

Tensor sinusoidal_rows_2d(std::span<const PositionIndex> positions, std::size_t width) {
  if (width % 4 != 0) throw Error(ErrorCode::kBadWidth, "2D sinusoidal width must be divisible by 4");
  const std::size_t half = width / 2;
  std::vector<double> out(positions.size() * width);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    fill_sinusoid(out.data() + r * width, static_cast<double>(positions[r][0]), half);
    fill_sinusoid(out.data() + r * width + half, static_cast<double>(positions[r][1]), half);
  }
  return Tensor::from({positions.size(), width}, std::move(out));
}

std::vector<double> interpolation_matrix(std::size_t in, std::size_t out) {
  std::vector<double> w(out * in, 0.0);
  if (out <= in) {
    for (std::size_t i = 0; i < out; ++i) w[i * in + i] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < out; ++i) {
    const double q = in == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(q));
    if (lo >= in - 1) lo = in > 1 ? in - 2 : 0;
    const double frac = in == 1 ? 0.0 : q - static_cast<double>(lo);
    w[i * in + lo] += 1.0 - frac;
    if (in > 1) w[i * in + lo + 1] += frac;
  }
  return w;
}

Tensor ape_learned_interpolated(const ApeLearnTable& t, std::size_t eval_length) {
  if (!t.table.defined() || t.table.dim(0) == 0) throw Error(ErrorCode::kEmptyTable, "APE table is empty");
  if (eval_length == 0) throw Error(ErrorCode::kOutOfRange, "eval length must be >= 1");
  const std::size_t rows = t.table.dim(0);
  if (eval_length <= rows) {
    std::vector<long> ids(eval_length);
    for (std::size_t i = 0; i < eval_length; ++i) ids[i] = static_cast<long>(i);
    return gather_rows(t.table, ids);
  }
  Tensor w = Tensor::from({eval_length, rows}, interpolation_matrix(rows, eval_length));
  return matmul(w, t.table);
}

Tensor ape_learned_interpolated_2d(const ApeLearnTable& t, std::size_t rows, std::size_t cols) {
  if (!t.table.defined() || t.extent.size() != 2) throw Error(ErrorCode::kEmptyTable, "2D APE table is empty");
  const auto th = static_cast<std::size_t>(t.extent[0]);
  const auto tw = static_cast<std::size_t>(t.extent[1]);
  if (rows <= th && cols <= tw) {
    std::vector<long> ids;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ids.push_back(static_cast<long>(r * tw + c));
    return gather_rows(t.table, ids);
  }
  const auto wr = interpolation_matrix(th, rows);
  const auto wc = interpolation_matrix(tw, cols);
  std::vector<double> w(rows * cols * th * tw);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t i = 0; i < th; ++i)
        for (std::size_t j = 0; j < tw; ++j)
          w[(r * cols + c) * th * tw + i * tw + j] = wr[r * th + i] * wc[c * tw + j];
  return matmul(Tensor::from({rows * cols, th * tw}, std::move(w)), t.table);
}

RopeParams make_rope_params(double base, std::size_t width) {
  if (width % 2 != 0) throw Error(ErrorCode::kOddWidth, "rotary width " + std::to_string(width));
  RopeParams p;
  p.base = base;
  for (std::size_t t = 0; t < width / 2; ++t)
    p.freqs.push_back(std::pow(base, -2.0 * static_cast<double>(t) / static_cast<double>(width)));
  return p;
}

Tensor rotate_pairs(const Tensor& x, std::vector<double> angles) {
  const std::size_t len = x.dim(-2), width = x.dim(-1);
  if (width % 2 != 0) throw Error(ErrorCode::kOddWidth, "rotary width " + std::to_string(width));
  const std::size_t half = width / 2;
  if (angles.size() != len * half) throw Error(ErrorCode::kShapeMismatch, "rotation angle count");
  std::vector<double> cs(angles.size()), sn(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    cs[i] = std::cos(angles[i]);
    sn[i] = std::sin(angles[i]);
  }
  const std::size_t batch = x.numel() / (len * width);
  std::vector<double> out(x.numel());
  const double* src = x.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t l = 0; l < len; ++l) {
      const double* in = src + (b * len + l) * width;
      double* o = out.data() + (b * len + l) * width;
      for (std::size_t t = 0; t < half; ++t) {
        const double c = cs[l * half + t], s = sn[l * half + t];
        o[2 * t] = in[2 * t] * c - in[2 * t + 1] * s;
        o[2 * t + 1] = in[2 * t] * s + in[2 * t + 1] * c;
      }
    }
  return make_result(x.shape(), std::move(out), {x},
                     [x, cs = std::move(cs), sn = std::move(sn), len, width, half, batch](const detail::Node& self) {
                       Tensor xs = x;
                       auto gx = xs.mutable_grad();
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t l = 0; l < len; ++l) {
                           const double* g = self.grad.data() + (b * len + l) * width;
                           double* d = gx.data() + (b * len + l) * width;
                           for (std::size_t t = 0; t < half; ++t) {
                             const double c = cs[l * half + t], s = sn[l * half + t];
                             d[2 * t] += g[2 * t] * c + g[2 * t + 1] * s;
                             d[2 * t + 1] += -g[2 * t] * s + g[2 * t + 1] * c;
                           }
                         }
                     });
}

Tensor rope_rotate(const Tensor& x, std::span<const long> positions, const RopeParams& params) {
  const std::size_t len = x.dim(-2), width = x.dim(-1);
  if (width % 2 != 0) throw Error(ErrorCode::kOddWidth, "rotary width " + std::to_string(width));
  if (positions.size() != len) throw Error(ErrorCode::kShapeMismatch, "rope position count != rows");
  if (params.freqs.size() != width / 2) throw Error(ErrorCode::kShapeMismatch, "rope params width");
  std::vector<double> angles(len * width / 2);
  for (std::size_t l = 0; l < len; ++l)
    for (std::size_t t = 0; t < width / 2; ++t)
      angles[l * width / 2 + t] = static_cast<double>(positions[l]) * params.freqs[t];
  return rotate_pairs(x, std::move(angles));
}

Tensor rope2d_rotate(const Tensor& x, std::span<const PositionIndex> positions, const RopeParams& params) {
  const std::size_t len = x.dim(-2), width = x.dim(-1);
  if (width % 4 != 0) throw Error(ErrorCode::kBadWidth, "axial rotary width must be divisible by 4");
  if (positions.size() != len) throw Error(ErrorCode::kShapeMismatch, "rope2d position count != rows");
  const std::size_t quarter = width / 4;
  if (params.freqs.size() != quarter) throw Error(ErrorCode::kShapeMismatch, "rope2d params must be built at width d/2");
  std::vector<double> angles(len * width / 2);
  for (std::size_t l = 0; l < len; ++l) {
    if (positions[l].size() != 2) throw Error(ErrorCode::kDimMismatch, "rope2d needs 2D positions");
    for (std::size_t t = 0; t < quarter; ++t) {
      angles[l * 2 * quarter + t] = static_cast<double>(positions[l][0]) * params.freqs[t];
      angles[l * 2 * quarter + quarter + t] = static_cast<double>(positions[l][1]) * params.freqs[t];
    }
  }
  return rotate_pairs(x, std::move(angles));
}

std::vector<double> alibi_slopes(std::size_t heads) {
  std::vector<double> m(heads);
  for (std::size_t h = 0; h < heads; ++h)
    m[h] = std::pow(2.0, -8.0 * static_cast<double>(h + 1) / static_cast<double>(heads));
  return m;
}

Tensor alibi_bias(std::size_t length, std::size_t heads) {
  std::vector<long> pos(length);
  for (std::size_t i = 0; i < length; ++i) pos[i] = static_cast<long>(i);
  return alibi_bias_at(pos, heads);
}

Tensor alibi_bias_at(std::span<const long> positions, std::size_t heads) {
  const std::size_t len = positions.size();
  const auto slopes = alibi_slopes(heads);
  std::vector<double> out(heads * len * len);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j)
        out[(h * len + i) * len + j] = j <= i ? -slopes[h] * static_cast<double>(positions[i] - positions[j])
                                              : -std::numeric_limits<double>::infinity();
  return Tensor::from({heads, len, len}, std::move(out));
}

}  // namespace seqpe
