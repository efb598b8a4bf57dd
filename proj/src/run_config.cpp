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

#include "seqpe/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "seqpe/error.hpp"

namespace seqpe {

namespace {

struct Value {
  std::string scalar;
  std::vector<std::string> items;
  bool is_array = false;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote != 0) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

Value parse_value(const std::string& raw) {
  Value v;
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']') throw std::invalid_argument("unterminated array");
    v.is_array = true;
    std::stringstream ss(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = unquote(trim(item));
      if (!item.empty()) v.items.push_back(item);
    }
    return v;
  }
  v.scalar = unquote(raw);
  return v;
}

template <typename T>
T parse_number(const std::string& s) {
  T out{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return out;
}

std::size_t as_size(const Value& v) { return parse_number<std::size_t>(v.scalar); }
long as_long(const Value& v) { return parse_number<long>(v.scalar); }
double as_double(const Value& v) { return parse_number<double>(v.scalar); }

bool as_bool(const Value& v) {
  if (v.scalar == "true") return true;
  if (v.scalar == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + v.scalar + "'");
}

using Setter = std::function<void(RunConfig&, const Value&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"task",
       [](RunConfig& c, const Value& v) {
         if (v.scalar == "lm") c.task = TaskKind::kLm;
         else if (v.scalar == "grid2d") c.task = TaskKind::kGrid2d;
         else throw std::invalid_argument("task must be lm or grid2d");
       }},
      {"pe", [](RunConfig& c, const Value& v) { c.pe = parse_pe_kind(v.scalar); }},
      {"fusion", [](RunConfig& c, const Value& v) { c.fusion = parse_attention_mode(v.scalar); }},
      {"base", [](RunConfig& c, const Value& v) { c.base = static_cast<int>(as_long(v)); }},
      {"digits", [](RunConfig& c, const Value& v) { c.digits = static_cast<int>(as_long(v)); }},
      {"width", [](RunConfig& c, const Value& v) { c.width = as_size(v); }},
      {"layers", [](RunConfig& c, const Value& v) { c.layers = as_size(v); }},
      {"heads", [](RunConfig& c, const Value& v) { c.heads = as_size(v); }},
      {"encoder_layers", [](RunConfig& c, const Value& v) { c.encoder_layers = as_size(v); }},
      {"encoder_heads", [](RunConfig& c, const Value& v) { c.encoder_heads = as_size(v); }},
      {"vocab", [](RunConfig& c, const Value& v) { c.vocab = as_size(v); }},
      {"train_length", [](RunConfig& c, const Value& v) { c.train_length = as_long(v); }},
      {"corpus", [](RunConfig& c, const Value& v) { c.corpus = v.scalar; }},
      {"corpus_tokens", [](RunConfig& c, const Value& v) { c.corpus_tokens = as_size(v); }},
      {"eval_tokens", [](RunConfig& c, const Value& v) { c.eval_tokens = as_size(v); }},
      {"rows", [](RunConfig& c, const Value& v) { c.rows = as_long(v); }},
      {"cols", [](RunConfig& c, const Value& v) { c.cols = as_long(v); }},
      {"classes", [](RunConfig& c, const Value& v) { c.classes = as_size(v); }},
      {"feature_dim", [](RunConfig& c, const Value& v) { c.feature_dim = as_size(v); }},
      {"train_samples", [](RunConfig& c, const Value& v) { c.train_samples = as_size(v); }},
      {"eval_samples", [](RunConfig& c, const Value& v) { c.eval_samples = as_size(v); }},
      {"eval_extents",
       [](RunConfig& c, const Value& v) {
         c.eval_extents.clear();
         if (!v.is_array) c.eval_extents.push_back(parse_extent(v.scalar));
         for (const auto& item : v.items) c.eval_extents.push_back(parse_extent(item));
       }},
      {"alpha", [](RunConfig& c, const Value& v) { c.alpha = as_double(v); }},
      {"beta", [](RunConfig& c, const Value& v) { c.beta = as_double(v); }},
      {"max_length", [](RunConfig& c, const Value& v) { c.max_length = as_long(v); }},
      {"batch_size", [](RunConfig& c, const Value& v) { c.batch_size = as_size(v); }},
      {"reg_pivots", [](RunConfig& c, const Value& v) { c.reg_pivots = as_size(v); }},
      {"reg_batch_size", [](RunConfig& c, const Value& v) { c.reg_batch_size = as_size(v); }},
      {"contrastive_size", [](RunConfig& c, const Value& v) { c.contrastive_size = as_size(v); }},
      {"distill_heads", [](RunConfig& c, const Value& v) { c.distill_heads = as_size(v); }},
      {"strategy",
       [](RunConfig& c, const Value& v) {
         if (v.scalar == "global") c.strategy = SamplingStrategy::kGlobal;
         else if (v.scalar == "local") c.strategy = SamplingStrategy::kLocal;
         else if (v.scalar == "mixed") c.strategy = SamplingStrategy::kMixed;
         else throw std::invalid_argument("strategy must be global, local or mixed");
       }},
      {"shift_prob", [](RunConfig& c, const Value& v) { c.shift_prob = as_double(v); }},
      {"steps", [](RunConfig& c, const Value& v) { c.steps = as_size(v); }},
      {"lr", [](RunConfig& c, const Value& v) { c.lr = as_double(v); }},
      {"lr_schedule",
       [](RunConfig& c, const Value& v) {
         if (v.scalar == "constant") c.schedule = LrSchedule::kConstant;
         else if (v.scalar == "linear") c.schedule = LrSchedule::kLinear;
         else throw std::invalid_argument("lr_schedule must be constant or linear");
       }},
      {"warmup_steps", [](RunConfig& c, const Value& v) { c.warmup_steps = as_size(v); }},
      {"weight_decay", [](RunConfig& c, const Value& v) { c.weight_decay = as_double(v); }},
      {"seed", [](RunConfig& c, const Value& v) { c.seed = parse_number<std::uint64_t>(v.scalar); }},
      {"rope_base", [](RunConfig& c, const Value& v) { c.rope_base = as_double(v); }},
      {"share_projection", [](RunConfig& c, const Value& v) { c.share_projection = as_bool(v); }},
      {"interpolate", [](RunConfig& c, const Value& v) { c.interpolate = as_bool(v); }},
      {"out_dir", [](RunConfig& c, const Value& v) { c.out_dir = v.scalar; }},
  };
  return table;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::kConfigInvalid, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<long> RunConfig::train_extent() const {
  return task == TaskKind::kLm ? std::vector<long>{train_length} : std::vector<long>{rows, cols};
}

std::vector<long> RunConfig::max_extent() const { return std::vector<long>(dims(), max_length); }

std::vector<long> parse_extent(std::string_view text) {
  std::vector<long> out;
  std::string s = trim(text);
  std::size_t start = 0;
  while (true) {
    const auto x = s.find('x', start);
    out.push_back(parse_number<long>(s.substr(start, x == std::string::npos ? std::string::npos : x - start)));
    if (x == std::string::npos) break;
    start = x + 1;
  }
  if (out.size() > 2) throw std::invalid_argument("extent must be L or HxW");
  for (long v : out)
    if (v <= 0) throw std::invalid_argument("extent must be positive");
  return out;
}

std::string extent_str(std::span<const long> extent) {
  std::string out;
  for (std::size_t i = 0; i < extent.size(); ++i) out += (i ? "x" : "") + std::to_string(extent[i]);
  return out;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  cfg.text = std::string(text);
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(number, "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string raw = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || raw.empty()) fail(number, "expected 'key = value'");
    auto it = setters().find(key);
    if (it == setters().end()) fail(number, "unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(number, "duplicate key '" + key + "'");
    try {
      it->second(cfg, parse_value(raw));
    } catch (const Error& e) {
      fail(number, key + ": " + e.what());
    } catch (const std::exception& e) {
      fail(number, key + ": " + e.what());
    }
  }
  if (!seen.count("max_length")) cfg.max_length = cfg.task == TaskKind::kLm ? 20000 : 100;
  if (!seen.count("eval_extents")) {
    if (cfg.task == TaskKind::kLm) cfg.eval_extents = {{cfg.train_length}, {2 * cfg.train_length}, {4 * cfg.train_length}};
    else cfg.eval_extents = {{cfg.rows, cfg.cols}, {cfg.rows * 3 / 2, cfg.cols * 3 / 2}};
  }
  if (cfg.task == TaskKind::kLm && cfg.corpus != "markov" && !seen.count("vocab")) cfg.vocab = 256;
  validate_run_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void validate_run_config(RunConfig& cfg) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kConfigInvalid, msg); };
  PosSeqConfig{cfg.base, cfg.digits, static_cast<int>(cfg.dims())}.validate();
  if (cfg.heads == 0 || cfg.width % cfg.heads != 0) bad("heads must divide width");
  if (cfg.encoder_heads == 0 || cfg.width % cfg.encoder_heads != 0) bad("encoder_heads must divide width");
  if (cfg.distill_heads == 0 || cfg.width % cfg.distill_heads != 0) bad("distill_heads must divide width");
  if (cfg.layers == 0 || cfg.encoder_layers == 0) bad("layers must be >= 1");
  if (cfg.alpha < 0 || cfg.beta < 0) bad("alpha and beta must be >= 0");
  if ((cfg.alpha > 0 || cfg.beta > 0) && cfg.pe != PeKind::kSeqPE)
    bad("alpha and beta must be 0 for pe = " + std::string(pe_kind_name(cfg.pe)));
  if (cfg.shift_prob < 0 || cfg.shift_prob > 1) bad("shift_prob must be in [0, 1]");
  if (cfg.batch_size == 0) bad("batch_size must be >= 1");
  if (cfg.reg_batch_size < 2 || cfg.reg_pivots == 0) bad("reg_batch_size must be >= 2 and reg_pivots >= 1");
  if (cfg.contrastive_size == 1) bad("contrastive_size must be >= 2");
  if (cfg.warmup_steps > 0 && cfg.warmup_steps >= cfg.steps) bad("warmup_steps must be below steps");
  if (cfg.lr <= 0) bad("lr must be positive");
  const auto train = cfg.train_extent();
  for (long t : train)
    if (t < (cfg.task == TaskKind::kLm ? 2 : 3)) bad("train extent too small");
  const long capacity = PosSeqConfig{cfg.base, cfg.digits, 1}.capacity();
  for (long t : train)
    if (cfg.max_length < t) bad("max_length must cover the train extent");
  if (cfg.pe == PeKind::kSeqPE && cfg.max_length > capacity) bad("max_length exceeds base^digits");
  if (cfg.task == TaskKind::kLm) {
    if (cfg.pe == PeKind::kRope2d) bad("rope2d needs task = grid2d");
    if (cfg.vocab < 2) bad("vocab must be >= 2");
  } else {
    if (cfg.pe == PeKind::kRope || cfg.pe == PeKind::kAlibi) bad("pe is one-dimensional; use rope2d for grid2d");
    if (cfg.classes == 0 || cfg.classes > kMaxGridClasses) bad("classes must be in [1, 8]");
  }
  long train_cells = 1;
  for (long t : train) train_cells *= t;
  if (cfg.pe == PeKind::kSeqPE && cfg.beta > 0 && static_cast<long>(cfg.reg_batch_size) > train_cells)
    bad("reg_batch_size exceeds the number of training positions");
  for (const auto& e : cfg.eval_extents) {
    if (e.size() != cfg.dims()) bad("eval extent " + extent_str(e) + " has the wrong rank");
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i] < train[i]) bad("eval extent " + extent_str(e) + " is smaller than the train extent");
  }
  long lmax_total = 1;
  for (std::size_t i = 0; i < cfg.dims(); ++i) lmax_total *= cfg.max_length;
  const long need = min_reg_batch_size(lmax_total);
  if (cfg.pe == PeKind::kSeqPE && static_cast<long>(cfg.reg_batch_size) < need)
    cfg.warnings.push_back("reg_batch_size " + std::to_string(cfg.reg_batch_size) + " is below the suggested " +
                           std::to_string(need) + " for max_length " + std::to_string(cfg.max_length));
}

TinyLMConfig lm_config(const RunConfig& cfg) {
  TinyLMConfig c;
  c.vocab = cfg.vocab;
  c.width = cfg.width;
  c.layers = cfg.layers;
  c.heads = cfg.heads;
  c.train_length = cfg.train_length;
  c.eval_lengths.clear();
  for (const auto& e : cfg.eval_extents) c.eval_lengths.push_back(e[0]);
  c.pe.kind = cfg.pe;
  c.pe.fusion = cfg.fusion;
  c.pe.rope_base = cfg.rope_base;
  c.pe.interpolate = cfg.interpolate;
  c.pe.share_projection = cfg.share_projection;
  c.pe.encoder = {{cfg.base, cfg.digits, 1}, cfg.width, cfg.encoder_heads, cfg.encoder_layers};
  c.weights = loss_weights(cfg);
  return c;
}

GridModelConfig grid_config(const RunConfig& cfg) {
  GridModelConfig c;
  c.feature_dim = cfg.feature_dim;
  c.classes = cfg.classes;
  c.width = cfg.width;
  c.layers = cfg.layers;
  c.heads = cfg.heads;
  c.rows = cfg.rows;
  c.cols = cfg.cols;
  c.eval_grids = cfg.eval_extents;
  c.pe.kind = cfg.pe;
  c.pe.fusion = cfg.fusion;
  c.pe.rope_base = cfg.rope_base;
  c.pe.interpolate = cfg.interpolate;
  c.pe.share_projection = cfg.share_projection;
  c.pe.encoder = {{cfg.base, cfg.digits, 2}, cfg.width, cfg.encoder_heads, cfg.encoder_layers};
  c.weights = loss_weights(cfg);
  return c;
}

RegularizerConfig reg_config(const RunConfig& cfg) {
  RegularizerConfig r;
  r.pivots = cfg.reg_pivots;
  r.candidates = cfg.contrastive_size ? cfg.contrastive_size : cfg.reg_batch_size;
  r.teachers = cfg.reg_batch_size;
  r.distill_heads = cfg.distill_heads;
  r.strategy = cfg.strategy;
  r.max_extent = cfg.max_extent();
  r.shift_prob = cfg.shift_prob;
  return r;
}

double scheduled_lr(const RunConfig& cfg, std::size_t step) {
  const double t = static_cast<double>(step);
  if (step < cfg.warmup_steps) return cfg.lr * (t + 1.0) / static_cast<double>(cfg.warmup_steps);
  if (cfg.schedule == LrSchedule::kConstant) return cfg.lr;
  const double rest = static_cast<double>(cfg.steps - cfg.warmup_steps);
  return cfg.lr * std::max(0.0, 1.0 - (t - static_cast<double>(cfg.warmup_steps)) / rest);
}

LossWeights loss_weights(const RunConfig& cfg) { return {cfg.alpha, cfg.beta}; }

}  // namespace seqpe
