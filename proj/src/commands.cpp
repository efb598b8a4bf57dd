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

#include "seqpe/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "seqpe/corpus.hpp"
#include "seqpe/error.hpp"

namespace seqpe {

namespace {

constexpr std::uint64_t kDataSeed = 20260101;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kTrainStream = 0x747261696eULL;
constexpr std::uint64_t kGradCheckStream = 0x67636bULL;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void sample_batch_indices(std::size_t n, std::size_t count, Rng& rng, std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<std::size_t>(rng.below(n)));
}

PosSeqConfig seq_config(const RunConfig& cfg) { return {cfg.base, cfg.digits, static_cast<int>(cfg.dims())}; }

template <typename F>
int guarded(const CommandOptions& opt, F&& body) {
  std::ostream& err = opt.err_stream ? *opt.err_stream : std::cerr;
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kNonFinite ? kExitNumeric : kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

std::ostream& out_of(const CommandOptions& opt) { return opt.out_stream ? *opt.out_stream : std::cout; }

Experiment load_with_table(const CommandOptions& opt) {
  if (opt.checkpoint.empty()) throw Error(ErrorCode::kConfigInvalid, "--checkpoint is required");
  Experiment exp = load_experiment(read_container(opt.checkpoint));
  if (!opt.use_table.empty()) {
    if (!exp.pe().is_seqpe()) throw Error(ErrorCode::kConfigInvalid, "--use-table needs a seqpe checkpoint");
    exp.pe().set_table(std::make_shared<PositionTable>(PositionTable::load(opt.use_table)));
  }
  return exp;
}

}  // namespace

PeProvider& Experiment::pe() { return lm ? lm->pe() : grid->pe(); }
const PeProvider& Experiment::pe() const { return lm ? lm->pe() : grid->pe(); }
ParameterList Experiment::parameters() const { return lm ? lm->parameters() : grid->parameters(); }

Experiment make_experiment(const RunConfig& cfg) {
  Experiment exp;
  exp.cfg = cfg;
  Rng init(cfg.seed, kInitStream);
  if (cfg.task == TaskKind::kLm) {
    exp.lm = std::make_unique<TinyLM>(lm_config(cfg), init);
    if (cfg.corpus == "markov") {
      MarkovCorpusOptions mo;
      mo.vocab = cfg.vocab;
      auto all = markov_corpus(kDataSeed, cfg.corpus_tokens + cfg.eval_tokens, mo);
      exp.train_tokens.assign(all.begin(), all.begin() + static_cast<long>(cfg.corpus_tokens));
      exp.eval_tokens.assign(all.begin() + static_cast<long>(cfg.corpus_tokens), all.end());
    } else {
      auto all = byte_corpus(cfg.corpus);
      const std::size_t held = std::min(cfg.eval_tokens, all.size() / 10);
      exp.train_tokens.assign(all.begin(), all.end() - static_cast<long>(held));
      exp.eval_tokens.assign(all.end() - static_cast<long>(held), all.end());
    }
  } else {
    exp.grid = std::make_unique<GridModel>(grid_config(cfg), init);
    exp.train_set = synth2d_generate(kDataSeed, cfg.rows, cfg.cols, cfg.classes, cfg.train_samples, cfg.feature_dim);
  }
  return exp;
}

std::vector<StepMetrics> train_experiment(Experiment& exp, const TrainOptions& options) {
  const RunConfig& cfg = exp.cfg;
  ParameterList params = exp.parameters();
  AdamState adam = make_adam_state(params, cfg.lr, cfg.weight_decay);
  const RegularizerConfig reg_cfg = reg_config(cfg);
  const LossWeights weights = loss_weights(cfg);
  const TrainRegion region{cfg.train_extent()};
  const PosSeqConfig seq = seq_config(cfg);
  Rng run(cfg.seed, kTrainStream);
  std::vector<StepMetrics> history;
  std::vector<std::size_t> idx;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng s = run.split(step);
    Rng data_rng = s.split(1);
    Rng reg_rng = s.split(2);
    Rng shift_rng = s.split(3);
    RegBatches reg;
    if (exp.pe().is_seqpe()) reg = sample_reg_batches(reg_cfg, region, seq, weights, reg_rng);
    adam.lr = scheduled_lr(cfg, step);
    StepMetrics m;
    if (exp.lm) {
      auto batch = sample_windows(exp.train_tokens, cfg.batch_size, static_cast<std::size_t>(cfg.train_length),
                                  data_rng);
      m = train_step(*exp.lm, batch, reg, weights, reg_cfg, adam, shift_rng);
    } else {
      sample_batch_indices(exp.train_set.samples.size(), cfg.batch_size, data_rng, idx);
      m = train_step(*exp.grid, make_grid_batch(exp.train_set, idx), reg, weights, reg_cfg, adam, shift_rng);
    }
    if (!std::isfinite(m.total)) throw Error(ErrorCode::kNonFinite, "non-finite loss at step " + std::to_string(step));
    if (options.metrics) {
      *options.metrics << "{\"step\":" << step << ",\"L_main\":" << num(m.main) << ",\"L_delta\":" << num(m.delta)
                       << ",\"L_ood\":" << num(m.ood) << ",\"total\":" << num(m.total)
                       << ",\"shifted\":" << (m.shifted ? "true" : "false") << "}\n";
    }
    if (options.log && options.log_every > 0 && (step + 1) % options.log_every == 0) {
      *options.log << "step " << step + 1 << "/" << cfg.steps << " main " << m.main << " delta " << m.delta
                   << " ood " << m.ood << "\n";
    }
    history.push_back(m);
  }
  return history;
}

std::vector<EvalRow> evaluate_experiment(const Experiment& exp, const std::vector<std::vector<long>>& extents) {
  const auto train = exp.cfg.train_extent();
  std::vector<EvalRow> rows;
  for (const auto& e : extents) {
    if (e.size() != train.size()) throw Error(ErrorCode::kDimMismatch, "extent " + extent_str(e) + " has wrong rank");
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i] < train[i])
        throw Error(ErrorCode::kOutOfRange, "extent " + extent_str(e) + " is smaller than the train extent");
    EvalRow row{e, 0.0};
    if (exp.lm) {
      row.metric = eval_perplexity(*exp.lm, exp.eval_tokens, static_cast<std::size_t>(e[0]));
    } else {
      row.metric = eval_accuracy_at_resolution(*exp.grid, e[0], e[1], kDataSeed + 1, exp.cfg.eval_samples);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string out = "extent,metric\n";
  for (const auto& r : rows) out += extent_str(r.extent) + "," + num(r.metric) + "\n";
  return out;
}

Container experiment_checkpoint(const Experiment& exp) {
  nlohmann::json meta;
  meta["kind"] = "checkpoint";
  meta["config"] = exp.cfg.text;
  meta["seed"] = exp.cfg.seed;
  meta["task"] = exp.cfg.task == TaskKind::kLm ? "lm" : "grid2d";
  meta["pe"] = std::string(pe_kind_name(exp.cfg.pe));
  return snapshot_parameters(exp.parameters(), std::move(meta), exp.cfg.text);
}

Experiment load_experiment(const Container& checkpoint) {
  if (checkpoint.metadata.value("kind", "") != "checkpoint")
    throw Error(ErrorCode::kFormat, "container is not a model checkpoint");
  RunConfig cfg = parse_run_config(checkpoint.metadata.at("config").get<std::string>());
  cfg.seed = checkpoint.metadata.at("seed").get<std::uint64_t>();
  Experiment exp = make_experiment(cfg);
  restore_parameters(checkpoint, exp.parameters());
  return exp;
}

Tensor position_embeddings(const Experiment& exp, const std::vector<PositionIndex>& positions) {
  const PeProvider& pe = exp.pe();
  if (!pe.is_seqpe()) throw Error(ErrorCode::kConfigInvalid, "position embeddings need a seqpe model");
  if (pe.table() != nullptr) return pe.table()->lookup_batch(positions);
  NoGradGuard guard;
  const std::size_t d = pe.encoder().width(), chunk = 256;
  std::vector<double> rows;
  rows.reserve(positions.size() * d);
  for (std::size_t i = 0; i < positions.size(); i += chunk) {
    const std::size_t n = std::min(chunk, positions.size() - i);
    Tensor e = pe.encoder().encode_batch(std::span<const PositionIndex>(positions.data() + i, n));
    rows.insert(rows.end(), e.data().begin(), e.data().end());
  }
  return Tensor::from({positions.size(), d}, std::move(rows));
}

namespace {

double dot_rows(const Tensor& e, std::size_t a, std::size_t b) {
  const std::size_t d = e.dim(1);
  const double* x = e.data().data() + a * d;
  const double* y = e.data().data() + b * d;
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

std::vector<std::vector<double>> heatmap_1d(const Experiment& exp, long length) {
  if (exp.cfg.dims() != 1) throw Error(ErrorCode::kDimMismatch, "1D heatmap needs a 1D model");
  Tensor e = position_embeddings(exp, grid_positions(std::vector<long>{length}));
  const auto n = static_cast<std::size_t>(length);
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = dot_rows(e, i, j);
  return m;
}

std::vector<std::vector<double>> heatmap_2d(const Experiment& exp, const PositionIndex& anchor, long rows, long cols) {
  if (exp.cfg.dims() != 2) throw Error(ErrorCode::kDimMismatch, "2D heatmap needs a 2D model");
  if (anchor.size() != 2 || anchor[0] < 0 || anchor[1] < 0 || anchor[0] >= rows || anchor[1] >= cols)
    throw Error(ErrorCode::kOutOfRange, "anchor " + anchor.str() + " outside the grid");
  auto positions = grid_positions(std::vector<long>{rows, cols});
  positions.push_back(anchor);
  Tensor e = position_embeddings(exp, positions);
  const std::size_t a = positions.size() - 1;
  std::vector<std::vector<double>> m(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = dot_rows(e, a, static_cast<std::size_t>(r * cols + c));
  return m;
}

std::string matrix_csv(const std::vector<std::vector<double>>& m) {
  std::string out;
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + num(row[j]);
    out += "\n";
  }
  return out;
}

GradCheckReport gradcheck_experiment(const RunConfig& base, const GradCheckOptions& options) {
  RunConfig cfg = base;
  if (cfg.width > 32) throw Error(ErrorCode::kConfigInvalid, "gradcheck needs width <= 32");
  cfg.corpus = "markov";
  cfg.corpus_tokens = 4 * static_cast<std::size_t>(cfg.train_length);
  cfg.eval_tokens = 0;
  cfg.train_samples = 4;
  Experiment exp = make_experiment(cfg);
  Rng rng(cfg.seed, kGradCheckStream);
  Rng data_rng = rng.split(1);
  Rng reg_rng = rng.split(2);
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, 2);
  RegBatches reg;
  const LossWeights weights = loss_weights(cfg);
  if (exp.pe().is_seqpe())
    reg = sample_reg_batches(reg_config(cfg), TrainRegion{cfg.train_extent()}, seq_config(cfg), weights, reg_rng);
  const auto positions = grid_positions(cfg.train_extent());
  std::function<Tensor()> loss;
  TokenBatch tokens;
  GridBatch grid_batch;
  std::vector<std::size_t> idx;
  if (exp.lm) {
    tokens = sample_windows(exp.train_tokens, batch, static_cast<std::size_t>(cfg.train_length), data_rng);
    loss = [&] { return full_objective(*exp.lm, tokens, positions, reg, weights); };
  } else {
    sample_batch_indices(exp.train_set.samples.size(), batch, data_rng, idx);
    grid_batch = make_grid_batch(exp.train_set, idx);
    loss = [&] { return full_objective(*exp.grid, grid_batch, positions, reg, weights); };
  }
  return grad_check(loss, exp.parameters(), options);
}

std::vector<PositionIndex> parse_anchors(const std::string& text) {
  std::vector<PositionIndex> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kConfigInvalid, "anchor '" + item + "' is not r:c");
    try {
      out.push_back({std::stol(item.substr(0, colon)), std::stol(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigInvalid, "anchor '" + item + "' is not r:c");
    }
  }
  return out;
}

std::vector<std::vector<long>> parse_extent_list(const std::string& text) {
  std::vector<std::vector<long>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_extent(item));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kConfigInvalid, "extent '" + item + "': " + e.what());
    }
  }
  return out;
}

int cmd_train(const CommandOptions& opt) {
  return guarded(opt, [&] {
    if (opt.config.empty()) throw Error(ErrorCode::kConfigInvalid, "--config is required");
    RunConfig cfg = load_run_config(opt.config);
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.out.empty()) cfg.out_dir = opt.out;
    std::ostream& err = opt.err_stream ? *opt.err_stream : std::cerr;
    for (const auto& w : cfg.warnings) err << "warning: " << w << "\n";
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    Experiment exp = make_experiment(cfg);
    std::ostringstream metrics;
    TrainOptions to;
    to.metrics = &metrics;
    to.log = &err;
    to.log_every = std::max<std::size_t>(1, cfg.steps / 10);
    std::vector<StepMetrics> history;
    try {
      history = train_experiment(exp, to);
    } catch (...) {
      write_text(dir / "metrics.jsonl", metrics.str());
      throw;
    }
    write_text(dir / "metrics.jsonl", metrics.str());
    write_container(dir / "checkpoint.bin", experiment_checkpoint(exp));
    const auto rows = evaluate_experiment(exp, cfg.eval_extents);
    write_text(dir / "eval.csv", eval_csv(rows));
    nlohmann::json summary;
    summary["steps"] = cfg.steps;
    summary["seed"] = cfg.seed;
    summary["parameters"] = parameter_count(exp.parameters());
    summary["metric"] = exp.lm ? "perplexity" : "accuracy";
    if (!history.empty()) {
      const auto& last = history.back();
      summary["final"] = {{"L_main", last.main}, {"L_delta", last.delta}, {"L_ood", last.ood}, {"total", last.total}};
    }
    for (const auto& r : rows) summary["eval"].push_back({{"extent", extent_str(r.extent)}, {"metric", r.metric}});
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    out_of(opt) << eval_csv(rows);
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opt) {
  return guarded(opt, [&] {
    Experiment exp = load_with_table(opt);
    const auto extents = opt.extents.empty() ? exp.cfg.eval_extents : opt.extents;
    const std::string csv = eval_csv(evaluate_experiment(exp, extents));
    if (opt.out.empty()) out_of(opt) << csv;
    else write_text(opt.out, csv);
    return kExitOk;
  });
}

int cmd_heatmap(const CommandOptions& opt) {
  return guarded(opt, [&] {
    Experiment exp = load_with_table(opt);
    const auto extent = opt.extents.empty() ? exp.cfg.train_extent() : opt.extents.front();
    if (extent.size() != exp.cfg.dims()) throw Error(ErrorCode::kDimMismatch, "extent rank does not match model");
    if (exp.cfg.dims() == 1) {
      const std::string csv = matrix_csv(heatmap_1d(exp, extent[0]));
      if (opt.out.empty()) out_of(opt) << csv;
      else write_text(std::filesystem::path(opt.out) / "heatmap.csv", csv);
      return kExitOk;
    }
    const long h = extent[0], w = extent[1];
    std::vector<PositionIndex> anchors = opt.anchors;
    if (anchors.empty()) anchors = {{0, 0}, {0, w - 1}, {h / 2, w / 2}, {h - 1, 0}, {h - 1, w - 1}};
    for (const auto& a : anchors) {
      const std::string csv = matrix_csv(heatmap_2d(exp, a, h, w));
      if (opt.out.empty()) {
        out_of(opt) << "# anchor " << a[0] << ":" << a[1] << "\n" << csv;
      } else {
        write_text(std::filesystem::path(opt.out) /
                       ("heatmap_" + std::to_string(a[0]) + "_" + std::to_string(a[1]) + ".csv"),
                   csv);
      }
    }
    return kExitOk;
  });
}

int cmd_precompute(const CommandOptions& opt) {
  return guarded(opt, [&] {
    if (opt.out.empty()) throw Error(ErrorCode::kConfigInvalid, "--out is required");
    if (opt.checkpoint.empty()) throw Error(ErrorCode::kConfigInvalid, "--checkpoint is required");
    Experiment exp = load_experiment(read_container(opt.checkpoint));
    if (!exp.pe().is_seqpe()) throw Error(ErrorCode::kConfigInvalid, "precompute needs a seqpe checkpoint");
    std::vector<long> region = opt.extents.empty() ? exp.cfg.eval_extents.back() : opt.extents.front();
    PositionTable table = precompute_table(exp.pe().encoder(), TrainRegion{region});
    table.save(opt.out);
    out_of(opt) << "wrote " << table.size() << " positions to " << opt.out << "\n";
    return kExitOk;
  });
}

int cmd_gradcheck(const CommandOptions& opt) {
  return guarded(opt, [&] {
    if (opt.config.empty()) throw Error(ErrorCode::kConfigInvalid, "--config is required");
    RunConfig cfg = load_run_config(opt.config);
    if (opt.seed) cfg.seed = *opt.seed;
    GradCheckOptions go;
    go.per_parameter = 3;
    go.seed = cfg.seed;
    go.flip_sign = opt.flip_sign;
    const GradCheckReport report = gradcheck_experiment(cfg, go);
    std::ostream& out = out_of(opt);
    out << "module,max_rel_error\n";
    for (const auto& [module, err] : report.max_error_by_module()) out << module << "," << num(err) << "\n";
    out << "checked " << report.entries.size() << " coordinates, max relative error " << num(report.max_rel_error)
        << ", tolerance " << num(go.tolerance) << ": " << (report.passed ? "PASS" : "FAIL") << "\n";
    return report.passed ? kExitOk : kExitNumeric;
  });
}

}  // namespace seqpe
