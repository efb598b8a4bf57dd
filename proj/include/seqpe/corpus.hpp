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
#include <filesystem>
#include <span>
#include <vector>

#include "seqpe/rng.hpp"

namespace seqpe {

// Token stream where each token usually repeats a fixed map of the token
// `lag` steps back and otherwise follows a sparse bigram table. Predicting
// it well needs the relative offset `lag`, so position information matters.
struct MarkovCorpusOptions {
  std::size_t vocab = 128;
  std::size_t lag = 2;
  double lag_prob = 0.8;
  std::size_t branching = 4;  // bigram successors per token
};

std::vector<int> markov_corpus(std::uint64_t seed, std::size_t length, const MarkovCorpusOptions& options = {});

// Raw bytes of a file as tokens in [0, 256). Throws EmptyCorpus / Io.
std::vector<int> byte_corpus(const std::filesystem::path& path);

// `batch` random windows of `length` tokens.
std::vector<std::vector<int>> sample_windows(std::span<const int> corpus, std::size_t batch, std::size_t length,
                                             Rng& rng);

}  // namespace seqpe
