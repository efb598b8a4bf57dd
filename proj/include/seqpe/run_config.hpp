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
#include <string>
#include <string_view>
#include <vector>

#include "seqpe/training.hpp"

namespace seqpe {

enum class TaskKind { kLm, kGrid2d };

enum class LrSchedule { kConstant, kLinear };

// Flat `key = value` file, a subset of TOML: one assignment per line, `#`
// comments, numbers, booleans, optionally quoted strings and [a, b] arrays.
// Extents are written "64" (1D) or "8x8" (2D).

struct RunConfig {
  TaskKind task = TaskKind::kLm;
  PeKind pe = PeKind::kSeqPE;
  AttentionMode fusion = AttentionMode::kAttnBias;
  int base = 10;
  int digits = 5;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 4;
  // lm
  std::size_t vocab = 128;
  long train_length = 64;
  std::string corpus = "markov";  // "markov" or a file path (bytes, vocab 256)
  std::size_t corpus_tokens = 200000;
  std::size_t eval_tokens = 16384;
  // grid2d
  long rows = 8;
  long cols = 8;
  std::size_t classes = 4;
  std::size_t feature_dim = 8;
  std::size_t train_samples = 2048;
  std::size_t eval_samples = 256;
  // both
  std::vector<std::vector<long>> eval_extents;
  double alpha = 0.1;
  double beta = 0.1;
  long max_length = 0;  // L_max per dimension
  std::size_t batch_size = 16;
  std::size_t reg_pivots = 8;
  std::size_t reg_batch_size = 32;
  std::size_t contrastive_size = 0;  // |C_delta|; 0 means reg_batch_size
  std::size_t distill_heads = 4;
  SamplingStrategy strategy = SamplingStrategy::kMixed;
  double shift_prob = 0.1;
  std::size_t steps = 2000;
  double lr = 1e-3;
  // Linear warmup from 0 over warmup_steps, then constant or linear decay to 0.
  LrSchedule schedule = LrSchedule::kLinear;
  std::size_t warmup_steps = 0;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  double rope_base = 1e4;
  bool share_projection = true;
  bool interpolate = true;
  std::string out_dir = "runs/default";

  // Source text, hashed into checkpoints.
  std::string text;
  std::vector<std::string> warnings;

  std::size_t dims() const { return task == TaskKind::kLm ? 1 : 2; }
  std::vector<long> train_extent() const;
  std::vector<long> max_extent() const;
};

// Learning rate for 0-based `step`.
double scheduled_lr(const RunConfig& cfg, std::size_t step);

// Throws ConfigInvalid with a "line N:" prefix for syntax and key errors.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
// Cross-field checks; throws ConfigInvalid, appends soft issues to warnings.
void validate_run_config(RunConfig& cfg);

std::vector<long> parse_extent(std::string_view text);
std::string extent_str(std::span<const long> extent);

TinyLMConfig lm_config(const RunConfig& cfg);
GridModelConfig grid_config(const RunConfig& cfg);
RegularizerConfig reg_config(const RunConfig& cfg);
LossWeights loss_weights(const RunConfig& cfg);

}  // namespace seqpe
