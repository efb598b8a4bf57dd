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

#include "seqpe/positions.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seqpe/error.hpp"

namespace seqpe {

long PosSeqConfig::capacity() const {
  long c = 1;
  for (int i = 0; i < digits; ++i) c *= base;
  return c;
}

void PosSeqConfig::validate() const {
  if (base < 2) throw Error(ErrorCode::kConfigInvalid, "base must be >= 2");
  if (digits < 1) throw Error(ErrorCode::kConfigInvalid, "digits per dimension must be >= 1");
  if (dims < 1) throw Error(ErrorCode::kConfigInvalid, "dimensionality must be >= 1");
  double log_cap = digits * std::log2(static_cast<double>(base));
  if (log_cap > 60.0) throw Error(ErrorCode::kConfigInvalid, "base^digits exceeds 2^60");
}

std::string PositionIndex::str() const {
  std::string out = "(";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(coords[i]);
  }
  return out + ")";
}

bool TrainRegion::contains(const PositionIndex& p) const {
  if (p.size() != limits.size()) return false;
  for (std::size_t i = 0; i < limits.size(); ++i)
    if (p[i] < 0 || p[i] >= limits[i]) return false;
  return true;
}

long TrainRegion::size() const {
  long n = 1;
  for (long l : limits) n *= l;
  return n;
}

DigitSequence to_digit_sequence(const PositionIndex& p, const PosSeqConfig& cfg) {
  if (p.size() != static_cast<std::size_t>(cfg.dims)) {
    throw Error(ErrorCode::kDimMismatch,
                "position " + p.str() + " has " + std::to_string(p.size()) + " dims, config has " +
                    std::to_string(cfg.dims));
  }
  const long cap = cfg.capacity();
  DigitSequence s;
  s.tokens.resize(cfg.sequence_length());
  for (int i = 0; i < cfg.dims; ++i) {
    long v = p[static_cast<std::size_t>(i)];
    if (v < 0 || v >= cap) {
      throw Error(ErrorCode::kOutOfRange, "coordinate " + std::to_string(v) + " outside [0, " + std::to_string(cap) + ")");
    }
    for (int j = cfg.digits - 1; j >= 0; --j) {
      s.tokens[static_cast<std::size_t>(i * cfg.digits + j)] = static_cast<int>(v % cfg.base);
      v /= cfg.base;
    }
  }
  return s;
}

PositionIndex from_digit_sequence(const DigitSequence& s, const PosSeqConfig& cfg) {
  if (s.tokens.size() != cfg.sequence_length()) {
    throw Error(ErrorCode::kDimMismatch, "digit sequence length " + std::to_string(s.tokens.size()) +
                                             " != n*k = " + std::to_string(cfg.sequence_length()));
  }
  PositionIndex p;
  p.coords.resize(static_cast<std::size_t>(cfg.dims));
  for (int i = 0; i < cfg.dims; ++i) {
    long v = 0;
    for (int j = 0; j < cfg.digits; ++j) {
      int t = s.tokens[static_cast<std::size_t>(i * cfg.digits + j)];
      if (t < 0 || t >= cfg.base) throw Error(ErrorCode::kBadToken, "digit token " + std::to_string(t));
      v = v * cfg.base + t;
    }
    p.coords[static_cast<std::size_t>(i)] = v;
  }
  return p;
}

double distance(const PositionIndex& a, const PositionIndex& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimMismatch, "distance between " + a.str() + " and " + b.str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i] - b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

PositionIndex shifted(const PositionIndex& p, const ShiftVector& z) {
  if (p.size() != z.z.size()) throw Error(ErrorCode::kDimMismatch, "shift dimensionality");
  PositionIndex out = p;
  for (std::size_t i = 0; i < p.size(); ++i) out.coords[i] += z.z[i];
  return out;
}

std::vector<int> to_base_digits(long value, int base) {
  if (value < 0) throw Error(ErrorCode::kOutOfRange, "negative value");
  std::vector<int> digits;
  do {
    digits.push_back(static_cast<int>(value % base));
    value /= base;
  } while (value > 0);
  std::reverse(digits.begin(), digits.end());
  return digits;
}

std::vector<int> apply_lexical_edit(std::vector<int> digits, LexicalEdit edit, std::size_t i, std::size_t arg) {
  switch (edit) {
    case LexicalEdit::kSwap:
      if (i < digits.size() && arg < digits.size()) std::swap(digits[i], digits[arg]);
      break;
    case LexicalEdit::kRemove:
      if (i < digits.size()) digits.erase(digits.begin() + static_cast<long>(i));
      break;
    case LexicalEdit::kInsert:
      digits.insert(digits.begin() + static_cast<long>(std::min(i, digits.size())), static_cast<int>(arg));
      break;
  }
  return digits;
}

long parse_clamped(std::span<const int> digits, const PosSeqConfig& cfg) {
  const long cap = cfg.capacity();
  long v = 0;
  for (int d : digits) {
    v = v * cfg.base + d;
    if (v >= cap) return cap - 1;
  }
  return v;
}

PositionIndex lexical_perturb(const PositionIndex& p, const PosSeqConfig& cfg, Rng& rng) {
  PositionIndex out = p;
  const std::size_t coord = static_cast<std::size_t>(rng.below(p.size()));
  std::vector<int> digits = to_base_digits(p[coord], cfg.base);
  const auto edit = static_cast<LexicalEdit>(rng.below(3));
  const std::size_t len = digits.size();
  switch (edit) {
    case LexicalEdit::kSwap: {
      if (len < 2) break;
      std::size_t i = rng.below(len);
      std::size_t j = rng.below(len - 1);
      if (j >= i) ++j;
      digits = apply_lexical_edit(std::move(digits), edit, i, j);
      break;
    }
    case LexicalEdit::kRemove:
      digits = apply_lexical_edit(std::move(digits), edit, rng.below(len), 0);
      break;
    case LexicalEdit::kInsert: {
      std::size_t at = rng.below(len + 1);
      std::size_t d = rng.below(static_cast<std::uint64_t>(cfg.base));
      digits = apply_lexical_edit(std::move(digits), edit, at, d);
      break;
    }
  }
  out.coords[coord] = parse_clamped(digits, cfg);
  return out;
}

std::size_t nearest_candidate(const PositionIndex& pivot, std::span<const PositionIndex> candidates,
                              std::size_t begin) {
  if (begin >= candidates.size()) throw Error(ErrorCode::kRegionTooSmall, "empty candidate pool");
  std::size_t best = begin;
  double best_d = distance(pivot, candidates[begin]);
  for (std::size_t i = begin + 1; i < candidates.size(); ++i) {
    const double d = distance(pivot, candidates[i]);
    if (d < best_d || (d == best_d && candidates[i] < candidates[best])) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

namespace {

// `count` distinct positions uniformly from the box [lo, hi), skipping
// anything in `exclude`.
std::vector<PositionIndex> sample_distinct(std::span<const long> lo, std::span<const long> hi, std::size_t count,
                                           const std::set<PositionIndex>& exclude, Rng& rng) {
  long total = 1;
  for (std::size_t i = 0; i < lo.size(); ++i) total *= (hi[i] - lo[i]);
  std::size_t excluded_inside = 0;
  for (const auto& e : exclude) {
    bool inside = e.size() == lo.size();
    for (std::size_t i = 0; inside && i < lo.size(); ++i) inside = e[i] >= lo[i] && e[i] < hi[i];
    excluded_inside += inside;
  }
  if (total < 0 || static_cast<std::size_t>(total) < count + excluded_inside) {
    throw Error(ErrorCode::kRegionTooSmall, "region of " + std::to_string(total) + " positions cannot supply " +
                                                std::to_string(count) + " distinct samples");
  }
  auto decode = [&](long flat) {
    PositionIndex p;
    p.coords.resize(lo.size());
    for (std::size_t i = lo.size(); i-- > 0;) {
      const long w = hi[i] - lo[i];
      p.coords[i] = lo[i] + flat % w;
      flat /= w;
    }
    return p;
  };
  std::vector<PositionIndex> out;
  out.reserve(count);
  if (static_cast<std::size_t>(total) <= 4 * (count + exclude.size()) + 64) {
    std::vector<PositionIndex> pool;
    for (long f = 0; f < total; ++f) {
      PositionIndex p = decode(f);
      if (!exclude.count(p)) pool.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  std::set<PositionIndex> seen;
  while (out.size() < count) {
    PositionIndex p = decode(static_cast<long>(rng.below(static_cast<std::uint64_t>(total))));
    if (exclude.count(p) || !seen.insert(p).second) continue;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

PositionIndex sample_pivot(std::span<const long> max_extent, Rng& rng) {
  PositionIndex p;
  for (long l : max_extent) p.coords.push_back(static_cast<long>(rng.below(static_cast<std::uint64_t>(l))));
  return p;
}

ContrastiveSet sample_contrastive_set(const PositionIndex& pivot, std::size_t m, std::span<const long> max_extent,
                                      SamplingStrategy strategy, const PosSeqConfig& cfg, Rng& rng,
                                      std::optional<std::size_t> lexical_count) {
  if (m < 1) throw Error(ErrorCode::kRegionTooSmall, "contrastive set needs m >= 1");
  if (pivot.size() != max_extent.size()) throw Error(ErrorCode::kDimMismatch, "pivot vs extent dims");
  for (long l : max_extent) {
    if (l < 1 || l > cfg.capacity()) throw Error(ErrorCode::kOutOfRange, "sampling extent outside representable range");
  }
  if (strategy == SamplingStrategy::kMixed) {
    strategy = rng.bernoulli(0.5) ? SamplingStrategy::kGlobal : SamplingStrategy::kLocal;
  }
  ContrastiveSet out;
  std::set<PositionIndex> taken{pivot};
  const std::vector<long> zeros(max_extent.size(), 0);

  if (strategy == SamplingStrategy::kGlobal) {
    std::size_t want_lex = std::min(lexical_count.value_or(m / 4), m - 1);
    // Perturbations may collide with the pivot or each other; give up after
    // a bounded number of tries and fill with uniform draws instead.
    for (std::size_t tries = 0; out.candidates.size() < want_lex && tries < 8 * want_lex + 8; ++tries) {
      PositionIndex q = lexical_perturb(pivot, cfg, rng);
      if (taken.insert(q).second) out.candidates.push_back(std::move(q));
    }
    out.eligible_begin = out.candidates.size();
    auto uniform = sample_distinct(zeros, max_extent, m - out.candidates.size(), taken, rng);
    out.candidates.insert(out.candidates.end(), uniform.begin(), uniform.end());
  } else {
    const long width = std::max<long>(256, static_cast<long>(m));
    std::vector<long> lo(max_extent.size()), hi(max_extent.size());
    for (std::size_t i = 0; i < max_extent.size(); ++i) {
      if (max_extent[i] <= width) {
        lo[i] = 0;
        hi[i] = max_extent[i];
        continue;
      }
      const long first = std::max<long>(0, pivot[i] - width + 1);
      const long last = std::min<long>(pivot[i], max_extent[i] - width);
      lo[i] = first <= last ? rng.range(first, last) : std::clamp<long>(pivot[i] - width / 2, 0, max_extent[i] - width);
      hi[i] = lo[i] + width;
    }
    out.candidates = sample_distinct(lo, hi, m, taken, rng);
    out.eligible_begin = 0;
  }
  out.positive = nearest_candidate(pivot, out.candidates, out.eligible_begin);
  return out;
}

ShiftVector sample_shift(const TrainRegion& region, std::span<const long> extent, Rng& rng) {
  if (extent.size() != region.limits.size()) throw Error(ErrorCode::kDimMismatch, "shift extent dims");
  ShiftVector z;
  for (std::size_t i = 0; i < extent.size(); ++i) {
    const long room = extent[i] - region.limits[i];
    if (room < 0) throw Error(ErrorCode::kOutOfRange, "training region exceeds the shift extent");
    z.z.push_back(rng.range(0, room));
  }
  return z;
}

OodSample sample_ood_batch(const TrainRegion& region, std::size_t m, const PosSeqConfig& cfg, Rng& rng,
                           std::optional<std::vector<long>> extent) {
  if (region.limits.size() != static_cast<std::size_t>(cfg.dims)) {
    throw Error(ErrorCode::kDimMismatch, "region dims vs config dims");
  }
  std::vector<long> bounds = extent.value_or(std::vector<long>(region.limits.size(), cfg.capacity()));
  for (long& b : bounds) b = std::min(b, cfg.capacity());
  const std::vector<long> zeros(region.limits.size(), 0);
  OodSample out;
  out.teachers = sample_distinct(zeros, region.limits, m, {}, rng);
  out.shift = sample_shift(region, bounds, rng);
  return out;
}

std::vector<PositionIndex> enumerate_region(const TrainRegion& region) {
  std::vector<PositionIndex> out;
  const long total = region.size();
  out.reserve(static_cast<std::size_t>(total));
  for (long f = 0; f < total; ++f) {
    PositionIndex p;
    p.coords.resize(region.limits.size());
    long rest = f;
    for (std::size_t i = region.limits.size(); i-- > 0;) {
      p.coords[i] = rest % region.limits[i];
      rest /= region.limits[i];
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace seqpe
