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

#include "seqpe/grid2d.hpp"

#include <algorithm>
#include <tuple>

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

constexpr double kBackgroundNoise = 0.5;
constexpr double kMarkerNoise = 0.1;
constexpr double kMarkerThreshold = 0.5;

// L-shaped triple with arms of different length, so all eight dihedral
// images are distinct.
const std::vector<std::pair<long, long>> kBase = {{0, 0}, {0, 2}, {1, 0}};

}  // namespace

std::vector<PositionIndex> constellation(std::size_t cls) {
  if (cls >= kMaxGridClasses) throw Error(ErrorCode::kOutOfRange, "class outside [0, 8)");
  std::vector<std::pair<long, long>> pts;
  for (auto [r, c] : kBase) {
    // Rotate by 90 degrees (cls % 4) times, reflect across the diagonal for cls >= 4.
    for (std::size_t t = 0; t < cls % 4; ++t) std::tie(r, c) = std::pair<long, long>{c, -r};
    if (cls >= 4) std::swap(r, c);
    pts.emplace_back(r, c);
  }
  long min_r = pts[0].first, min_c = pts[0].second;
  for (auto [r, c] : pts) {
    min_r = std::min(min_r, r);
    min_c = std::min(min_c, c);
  }
  std::vector<PositionIndex> out;
  for (auto [r, c] : pts) out.push_back({r - min_r, c - min_c});
  std::sort(out.begin(), out.end());
  return out;
}

GridDataset synth2d_generate(std::uint64_t seed, long rows, long cols, std::size_t classes, std::size_t count,
                             std::size_t feature_dim) {
  if (rows < 3 || cols < 3) throw Error(ErrorCode::kOutOfRange, "grid must be at least 3x3");
  if (classes == 0 || classes > kMaxGridClasses) throw Error(ErrorCode::kOutOfRange, "classes outside [1, 8]");
  if (feature_dim == 0) throw Error(ErrorCode::kOutOfRange, "feature_dim must be positive");
  GridDataset ds{rows, cols, feature_dim, classes, {}};
  Rng rng(seed, 0x67726964ULL);
  const auto cells = static_cast<std::size_t>(rows * cols);
  for (std::size_t i = 0; i < count; ++i) {
    Rng r = rng.split(i);
    GridSample s;
    s.label = static_cast<int>(i % classes);
    s.features.resize(cells * feature_dim);
    for (std::size_t c = 0; c < cells; ++c) {
      s.features[c * feature_dim] = r.normal(0.0, kMarkerNoise);
      for (std::size_t f = 1; f < feature_dim; ++f) s.features[c * feature_dim + f] = r.normal(0.0, kBackgroundNoise);
    }
    const auto shape = constellation(static_cast<std::size_t>(s.label));
    long span_r = 0, span_c = 0;
    for (const auto& p : shape) {
      span_r = std::max(span_r, p[0]);
      span_c = std::max(span_c, p[1]);
    }
    const long r0 = r.range(0, rows - 1 - span_r);
    const long c0 = r.range(0, cols - 1 - span_c);
    for (const auto& p : shape) {
      const auto cell = static_cast<std::size_t>((r0 + p[0]) * cols + (c0 + p[1]));
      s.features[cell * feature_dim] = 1.0 + r.normal(0.0, kMarkerNoise);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

int arrangement_label(const GridSample& sample, const GridDataset& ds) {
  std::vector<PositionIndex> marks;
  for (long r = 0; r < ds.rows; ++r)
    for (long c = 0; c < ds.cols; ++c)
      if (sample.features[static_cast<std::size_t>(r * ds.cols + c) * ds.feature_dim] > kMarkerThreshold)
        marks.push_back({r, c});
  if (marks.empty()) return -1;
  long min_r = marks[0][0], min_c = marks[0][1];
  for (const auto& m : marks) {
    min_r = std::min(min_r, m[0]);
    min_c = std::min(min_c, m[1]);
  }
  for (auto& m : marks) m = PositionIndex{m[0] - min_r, m[1] - min_c};
  std::sort(marks.begin(), marks.end());
  for (std::size_t c = 0; c < ds.classes; ++c)
    if (constellation(c) == marks) return static_cast<int>(c);
  return -1;
}

}  // namespace seqpe
