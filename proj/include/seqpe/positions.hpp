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

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqpe/rng.hpp"

namespace seqpe {

// Digit-sequence codec parameters: base b, k digits per dimension, n dims.
struct PosSeqConfig {
  int base = 10;
  int digits = 5;
  int dims = 1;

  // b^k, the exclusive per-dimension upper bound.
  long capacity() const;
  std::size_t sequence_length() const { return static_cast<std::size_t>(digits * dims); }
  // Throws ConfigInvalid unless b >= 2, k >= 1, n >= 1 and b^k fits.
  void validate() const;
};

struct PositionIndex {
  std::vector<long> coords;

  PositionIndex() = default;
  PositionIndex(std::initializer_list<long> c) : coords(c) {}
  explicit PositionIndex(std::vector<long> c) : coords(std::move(c)) {}

  std::size_t size() const { return coords.size(); }
  long operator[](std::size_t i) const { return coords[i]; }
  auto operator<=>(const PositionIndex&) const = default;
  bool operator==(const PositionIndex&) const = default;
  std::string str() const;
};

struct DigitSequence {
  std::vector<int> tokens;
  bool operator==(const DigitSequence&) const = default;
};

// Box [0, L_0) x ... x [0, L_{n-1}).
struct TrainRegion {
  std::vector<long> limits;

  bool contains(const PositionIndex& p) const;
  long size() const;
};

struct ShiftVector {
  std::vector<long> z;
};

// Per dimension: big-endian base-b digits, left-padded with 0 to k digits;
// dimensions concatenated in coordinate order.
DigitSequence to_digit_sequence(const PositionIndex& p, const PosSeqConfig& cfg);
PositionIndex from_digit_sequence(const DigitSequence& s, const PosSeqConfig& cfg);

// Euclidean distance.
double distance(const PositionIndex& a, const PositionIndex& b);

PositionIndex shifted(const PositionIndex& p, const ShiftVector& z);

// Minimal base-b digit string of a non-negative value ("0" -> {0}).
std::vector<int> to_base_digits(long value, int base);

enum class LexicalEdit { kSwap, kRemove, kInsert };

// kSwap swaps digits i and j; kRemove drops digit i; kInsert puts digit
// `arg` in front of index i (i == size appends).
std::vector<int> apply_lexical_edit(std::vector<int> digits, LexicalEdit edit, std::size_t i, std::size_t arg);

// Parses digits (empty -> 0) and clamps to [0, b^k).
long parse_clamped(std::span<const int> digits, const PosSeqConfig& cfg);

// One random edit (swap two digits, remove one, or insert one) applied to
// the digit string of one random coordinate. The result can equal p, e.g.
// swapping in a one-digit string.
PositionIndex lexical_perturb(const PositionIndex& p, const PosSeqConfig& cfg, Rng& rng);

// kMixed picks kGlobal or kLocal with a fair coin on every call.
enum class SamplingStrategy { kGlobal, kLocal, kMixed };

struct ContrastiveSet {
  std::vector<PositionIndex> candidates;
  // Index of p+ within candidates.
  std::size_t positive = 0;
  // candidates[eligible_begin..] is the pool p+ was chosen from.
  std::size_t eligible_begin = 0;
};

// Index of the candidate in [begin, end) closest to the pivot; ties go to the
// lexicographically smallest coordinates.
std::size_t nearest_candidate(const PositionIndex& pivot, std::span<const PositionIndex> candidates,
                              std::size_t begin = 0);

// Uniform pivot in [0, max_extent_i) per dimension.
PositionIndex sample_pivot(std::span<const long> max_extent, Rng& rng);

// Builds C with m distinct positions, none equal to the pivot.
//  kGlobal: `lexical_count` (default m/4) lexical perturbations of the pivot,
//           then uniform positions from [0, max_extent); p+ is the nearest of
//           the uniform part.
//  kLocal:  a window of width max(256, m) per dimension containing the
//           pivot; all m positions come from the window; p+ is the nearest
//           overall.
ContrastiveSet sample_contrastive_set(const PositionIndex& pivot, std::size_t m, std::span<const long> max_extent,
                                      SamplingStrategy strategy, const PosSeqConfig& cfg, Rng& rng,
                                      std::optional<std::size_t> lexical_count = std::nullopt);

struct OodSample {
  std::vector<PositionIndex> teachers;
  ShiftVector shift;
};

// m distinct teachers from the region and a shift with
// z_i in [0, extent_i - L_i]; extent defaults to b^k in every dimension.
OodSample sample_ood_batch(const TrainRegion& region, std::size_t m, const PosSeqConfig& cfg, Rng& rng,
                           std::optional<std::vector<long>> extent = std::nullopt);

// Shift z_i uniform in [0, extent_i - L_i].
ShiftVector sample_shift(const TrainRegion& region, std::span<const long> extent, Rng& rng);

// Row-major enumeration of all positions in [0, limits).
std::vector<PositionIndex> enumerate_region(const TrainRegion& region);

}  // namespace seqpe
