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

#include "seqpe/corpus.hpp"

#include <fstream>
#include <iterator>

#include "seqpe/error.hpp"

namespace seqpe {

std::vector<int> markov_corpus(std::uint64_t seed, std::size_t length, const MarkovCorpusOptions& options) {
  if (options.vocab < 2 || options.lag == 0 || options.branching == 0)
    throw Error(ErrorCode::kConfigInvalid, "markov corpus needs vocab >= 2, lag >= 1, branching >= 1");
  Rng rng(seed, 0x636f72707573ULL);
  Rng table_rng = rng.split(1);
  std::vector<int> lag_map(options.vocab);
  for (std::size_t i = 0; i < options.vocab; ++i) lag_map[i] = static_cast<int>(i);
  table_rng.shuffle(std::span<int>(lag_map));
  std::vector<int> successors(options.vocab * options.branching);
  for (int& s : successors) s = static_cast<int>(table_rng.below(options.vocab));

  Rng gen = rng.split(2);
  std::vector<int> out;
  out.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (t < options.lag) {
      out.push_back(static_cast<int>(gen.below(options.vocab)));
    } else if (gen.bernoulli(options.lag_prob)) {
      out.push_back(lag_map[static_cast<std::size_t>(out[t - options.lag])]);
    } else {
      const auto prev = static_cast<std::size_t>(out[t - 1]);
      out.push_back(successors[prev * options.branching + gen.below(options.branching)]);
    }
  }
  return out;
}

std::vector<int> byte_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw Error(ErrorCode::kEmptyCorpus, "corpus " + path.string() + " is empty");
  std::vector<int> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<unsigned char>(bytes[i]);
  return out;
}

std::vector<std::vector<int>> sample_windows(std::span<const int> corpus, std::size_t batch, std::size_t length,
                                             Rng& rng) {
  if (corpus.size() < length || length == 0)
    throw Error(ErrorCode::kEmptyCorpus, "corpus shorter than window length");
  std::vector<std::vector<int>> out(batch);
  for (auto& w : out) {
    const auto start = static_cast<std::size_t>(rng.below(corpus.size() - length + 1));
    w.assign(corpus.begin() + static_cast<long>(start), corpus.begin() + static_cast<long>(start + length));
  }
  return out;
}

}  // namespace seqpe
