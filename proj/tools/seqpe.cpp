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

#include <CLI11.hpp>

#include <iostream>

#include "seqpe/commands.hpp"
#include "seqpe/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SeqPE: sequential position encoding experiments"};
  app.require_subcommand(1);

  seqpe::CommandOptions opt;
  std::uint64_t seed = 0;
  std::string extents, anchors;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", opt.out, "Output file or directory");
  };

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint, metrics and eval CSV");
  train->add_option("--config", opt.config, "Run config file")->required();
  add_common(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint at a list of extents");
  eval->add_option("--checkpoint", opt.checkpoint, "Checkpoint container")->required();
  eval->add_option("--extents", extents, "Comma-separated extents, e.g. 64,128,256 or 8x8,12x12");
  eval->add_option("--use-table", opt.use_table, "Read position embeddings from a precomputed table");
  add_common(eval);

  auto* heatmap = app.add_subcommand("heatmap", "Export position-embedding dot-product matrices");
  heatmap->add_option("--checkpoint", opt.checkpoint, "Checkpoint container")->required();
  heatmap->add_option("--extents", extents, "Range length (1D) or grid HxW (2D)");
  heatmap->add_option("--anchors", anchors, "Comma-separated r:c anchors (2D)");
  heatmap->add_option("--use-table", opt.use_table, "Read position embeddings from a precomputed table");
  add_common(heatmap);

  auto* precompute = app.add_subcommand("precompute", "Encode every position of a region into a lookup table");
  precompute->add_option("--checkpoint", opt.checkpoint, "Checkpoint container")->required();
  precompute->add_option("--extents", extents, "Region, e.g. 2048 or 14x14");
  add_common(precompute);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full objective");
  gradcheck->add_option("--config", opt.config, "Run config file (width <= 32)")->required();
  gradcheck->add_flag("--flip-sign", opt.flip_sign, "Negate analytic gradients (negative control)");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? seqpe::kExitOk : seqpe::kExitConfig;
  }

  for (auto* sub : {train, eval, heatmap, precompute, gradcheck})
    if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;

  try {
    if (!extents.empty()) opt.extents = seqpe::parse_extent_list(extents);
    if (!anchors.empty()) opt.anchors = seqpe::parse_anchors(anchors);
  } catch (const seqpe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return seqpe::kExitConfig;
  }

  if (train->parsed()) return seqpe::cmd_train(opt);
  if (eval->parsed()) return seqpe::cmd_eval(opt);
  if (heatmap->parsed()) return seqpe::cmd_heatmap(opt);
  if (precompute->parsed()) return seqpe::cmd_precompute(opt);
  return seqpe::cmd_gradcheck(opt);
}
