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

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "seqpe/checkpoint.hpp"
#include "seqpe/grad_check.hpp"
#include "seqpe/run_config.hpp"

namespace seqpe {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;

// A model plus the data it trains and evaluates on, all derived from a
// RunConfig. Corpora and grid sets come from fixed data seeds, so runs with
// different `seed` values share data and differ in init and sampling.
struct Experiment {
  RunConfig cfg;
  std::unique_ptr<TinyLM> lm;
  std::unique_ptr<GridModel> grid;
  std::vector<int> train_tokens;
  std::vector<int> eval_tokens;
  GridDataset train_set;

  PeProvider& pe();
  const PeProvider& pe() const;
  ParameterList parameters() const;
};

Experiment make_experiment(const RunConfig& cfg);

struct TrainOptions {
  // One JSON object per step: step, L_main, L_delta, L_ood, total.
  std::ostream* metrics = nullptr;
  // Human-readable progress every `log_every` steps.
  std::ostream* log = nullptr;
  std::size_t log_every = 0;
};

// Runs cfg.steps train steps. Throws NonFinite on a NaN/inf loss.
std::vector<StepMetrics> train_experiment(Experiment& exp, const TrainOptions& options = {});

struct EvalRow {
  std::vector<long> extent;
  double metric = 0.0;  // perplexity (lm) or accuracy (grid2d)
};

std::vector<EvalRow> evaluate_experiment(const Experiment& exp, const std::vector<std::vector<long>>& extents);
// "extent,metric" header plus one row per extent, values at full precision.
std::string eval_csv(const std::vector<EvalRow>& rows);

Container experiment_checkpoint(const Experiment& exp);
Experiment load_experiment(const Container& checkpoint);

// Position embeddings e_p for every position, from the attached table when
// present, else encoded. SeqPE only.
Tensor position_embeddings(const Experiment& exp, const std::vector<PositionIndex>& positions);
// L x L matrix of e_i . e_j over [0, L).
std::vector<std::vector<double>> heatmap_1d(const Experiment& exp, long length);
// h x w matrix of e_anchor . e_(r, c).
std::vector<std::vector<double>> heatmap_2d(const Experiment& exp, const PositionIndex& anchor, long rows, long cols);
std::string matrix_csv(const std::vector<std::vector<double>>& m);

// Gradient check of the full objective on a tiny instance of the config.
// Throws ConfigInvalid when width exceeds 32.
GradCheckReport gradcheck_experiment(const RunConfig& cfg, const GradCheckOptions& options);

struct CommandOptions {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string use_table;
  std::vector<std::vector<long>> extents;
  std::vector<PositionIndex> anchors;
  bool flip_sign = false;
  std::ostream* out_stream = nullptr;  // defaults to std::cout
  std::ostream* err_stream = nullptr;  // defaults to std::cerr
};

int cmd_train(const CommandOptions& opt);
int cmd_eval(const CommandOptions& opt);
int cmd_heatmap(const CommandOptions& opt);
int cmd_precompute(const CommandOptions& opt);
int cmd_gradcheck(const CommandOptions& opt);

// "r:c" anchors, comma separated, e.g. "0:0,7:7".
std::vector<PositionIndex> parse_anchors(const std::string& text);
std::vector<std::vector<long>> parse_extent_list(const std::string& text);

}  // namespace seqpe
