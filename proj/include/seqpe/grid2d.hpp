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

#include <cstdint>
#include <vector>

#include "seqpe/positions.hpp"

namespace seqpe {

// One h x w grid of patch feature vectors, row-major, feature_dim per cell.
struct GridSample {
  std::vector<double> features;
  int label = 0;
};

struct GridDataset {
  long rows = 0;
  long cols = 0;
  std::size_t feature_dim = 0;
  std::size_t classes = 0;
  std::vector<GridSample> samples;
};

// Three identical marker patches arranged as a fixed asymmetric
// constellation; class c uses the c-th rotation/reflection of it. The bag of
// patches is the same for every class, so only the geometry carries the label.
inline constexpr std::size_t kMaxGridClasses = 8;

// Cell offsets of the class-c constellation, normalised to min row/col 0.
std::vector<PositionIndex> constellation(std::size_t cls);

// Deterministic per seed; labels balanced within 1. Needs h, w >= 3 so every
// constellation fits, and 1 <= classes <= 8.
GridDataset synth2d_generate(std::uint64_t seed, long rows, long cols, std::size_t classes, std::size_t count,
                             std::size_t feature_dim = 8);

// Label implied by the marker arrangement of a sample, or -1 when the
// markers do not form any class constellation.
int arrangement_label(const GridSample& sample, const GridDataset& ds);

}  // namespace seqpe
