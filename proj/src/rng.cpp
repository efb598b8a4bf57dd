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

#include "seqpe/rng.hpp"

#include <cmath>
#include <numbers>

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kMissingGrad: return "MissingGrad";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kBadToken: return "BadToken";
    case ErrorCode::kRegionTooSmall: return "RegionTooSmall";
    case ErrorCode::kOddWidth: return "OddWidth";
    case ErrorCode::kBadWidth: return "BadWidth";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kUnknownMode: return "UnknownMode";
    case ErrorCode::kPositiveNotInSet: return "PositiveNotInSet";
    case ErrorCode::kHeadMismatch: return "HeadMismatch";
    case ErrorCode::kContextTooLong: return "ContextTooLong";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kUnsupportedExtent: return "UnsupportedExtent";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL))) {}

std::uint64_t Rng::next_u64() {
  std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kOutOfRange, "Rng::below(0)");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  while (true) {
    std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

std::int64_t Rng::range(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(ErrorCode::kOutOfRange, "Rng::range with hi < lo");
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return mean + stddev * r * std::cos(t);
}

Rng Rng::split(std::uint64_t tag) const {
  Rng child(0);
  child.key_ = mix64(key_ ^ mix64(tag ^ 0x5851f42d4c957f2dULL));
  return child;
}

}  // namespace seqpe
