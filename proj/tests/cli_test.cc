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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "seqpe/commands.hpp"
#include "seqpe/error.hpp"
#include "seqpe/run_config.hpp"

namespace seqpe {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << text;
  return {};
}

TEST(RunConfigTest, DefaultsAndParsing) {
  RunConfig c = parse_run_config(
      "# comment\n"
      "task = \"lm\"   # trailing\n"
      "pe = seqpe\n"
      "fusion = 'AttnMul'\n"
      "eval_extents = [64, 128]\n"
      "alpha = 0.25\n"
      "share_projection = false\n");
  EXPECT_EQ(c.task, TaskKind::kLm);
  EXPECT_EQ(c.fusion, AttentionMode::kAttnMul);
  EXPECT_EQ(c.max_length, 20000);
  EXPECT_EQ(c.eval_extents, (std::vector<std::vector<long>>{{64}, {128}}));
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_FALSE(c.share_projection);
  EXPECT_EQ(c.strategy, SamplingStrategy::kMixed);
  EXPECT_EQ(reg_config(c).candidates, 32u);
  EXPECT_EQ(reg_config(parse_run_config("contrastive_size = 8\n")).candidates, 8u);
  EXPECT_EQ(reg_config(parse_run_config("contrastive_size = 8\n")).teachers, 32u);

  RunConfig g = parse_run_config("task = grid2d\nrows = 8\ncols = 6\n");
  EXPECT_EQ(g.max_length, 100);
  EXPECT_EQ(g.eval_extents, (std::vector<std::vector<long>>{{8, 6}, {12, 9}}));
  EXPECT_EQ(parse_extent("14x14"), (std::vector<long>{14, 14}));
  EXPECT_EQ(extent_str(std::vector<long>{3, 4}), "3x4");
}

TEST(RunConfigTest, ErrorsCarryLineNumbers) {
  EXPECT_NE(config_error("pe = seqpe\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("alpha = 0.1\nalpha = 0.2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(config_error("steps = many\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("just text\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("pe = rope\n").find("alpha and beta"), std::string::npos);
  config_error("fusion = concat\n");
  config_error("task = grid2d\npe = alibi\nalpha = 0\nbeta = 0\n");
  config_error("max_length = 200000\n");
  config_error("width = 30\nheads = 4\n");
  config_error("contrastive_size = 1\n");
  config_error("steps = 10\nwarmup_steps = 10\n");
  config_error("lr_schedule = cosine\n");
  config_error("task = lm\neval_extents = [\"8x8\"]\n");
}

TEST(RunConfigTest, LearningRateSchedule) {
  RunConfig c = parse_run_config("steps = 10\nlr = 1.0\nwarmup_steps = 2\n");
  EXPECT_EQ(scheduled_lr(c, 0), 0.5);
  EXPECT_EQ(scheduled_lr(c, 1), 1.0);
  EXPECT_EQ(scheduled_lr(c, 2), 1.0);
  EXPECT_EQ(scheduled_lr(c, 6), 0.5);
  EXPECT_EQ(scheduled_lr(c, 9), 1.0 / 8.0);
  RunConfig k = parse_run_config("steps = 10\nlr = 1.0\nlr_schedule = constant\n");
  for (std::size_t s = 0; s < 10; ++s) EXPECT_EQ(scheduled_lr(k, s), 1.0);
}

TEST(RunConfigTest, SmallRegBatchWarns) {
  RunConfig c = parse_run_config("reg_batch_size = 8\n");
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("32"), std::string::npos);
  EXPECT_TRUE(parse_run_config("reg_batch_size = 32\n").warnings.empty());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("seqpe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  CommandOptions options() {
    CommandOptions o;
    o.out_stream = &out_;
    o.err_stream = &err_;
    return o;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kTinyLm =
    "task = lm\npe = seqpe\nwidth = 16\nheads = 2\nencoder_heads = 2\nlayers = 1\nencoder_layers = 1\n"
    "vocab = 16\ntrain_length = 8\neval_extents = [8, 16]\nsteps = 50\nbatch_size = 2\nreg_pivots = 2\n"
    "reg_batch_size = 8\nmax_length = 2048\ncorpus_tokens = 4000\neval_tokens = 256\ndistill_heads = 2\n";

TEST_F(CliTest, TrainIsDeterministicAndEvalReproduces) {
  const fs::path cfg = write_config("lm.toml", kTinyLm);
  CommandOptions o = options();
  o.config = cfg.string();
  o.out = (dir_ / "run1").string();
  ASSERT_EQ(cmd_train(o), kExitOk) << err_.str();
  o.out = (dir_ / "run2").string();
  ASSERT_EQ(cmd_train(o), kExitOk) << err_.str();

  const std::string m1 = read_file(dir_ / "run1" / "metrics.jsonl");
  EXPECT_EQ(m1, read_file(dir_ / "run2" / "metrics.jsonl"));
  EXPECT_EQ(std::count(m1.begin(), m1.end(), '\n'), 50);
  EXPECT_EQ(read_file(dir_ / "run1" / "checkpoint.bin"), read_file(dir_ / "run2" / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(dir_ / "run1" / "summary.json"));

  const std::string train_eval = read_file(dir_ / "run1" / "eval.csv");
  CommandOptions e = options();
  e.checkpoint = (dir_ / "run1" / "checkpoint.bin").string();
  e.out = (dir_ / "eval.csv").string();
  ASSERT_EQ(cmd_eval(e), kExitOk) << err_.str();
  EXPECT_EQ(read_file(dir_ / "eval.csv"), train_eval);
  const std::string csv = read_file(dir_ / "eval.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);  // header + 2 extents

  // Precomputed table gives the same CSV.
  CommandOptions p = options();
  p.checkpoint = e.checkpoint;
  p.out = (dir_ / "table.bin").string();
  p.extents = {{2048}};
  ASSERT_EQ(cmd_precompute(p), kExitOk) << err_.str();
  e.use_table = p.out;
  e.out = (dir_ / "eval_table.csv").string();
  ASSERT_EQ(cmd_eval(e), kExitOk) << err_.str();
  EXPECT_EQ(read_file(dir_ / "eval_table.csv"), train_eval);

  // Heatmap from the table matches the direct one and is symmetric.
  CommandOptions h = options();
  h.checkpoint = e.checkpoint;
  h.extents = {{32}};
  h.out = (dir_ / "direct").string();
  ASSERT_EQ(cmd_heatmap(h), kExitOk);
  h.use_table = p.out;
  h.out = (dir_ / "tabled").string();
  ASSERT_EQ(cmd_heatmap(h), kExitOk);
  EXPECT_EQ(read_file(dir_ / "direct" / "heatmap.csv"), read_file(dir_ / "tabled" / "heatmap.csv"));

  Experiment exp = load_experiment(read_container(e.checkpoint));
  auto m = heatmap_1d(exp, 32);
  ASSERT_EQ(m.size(), 32u);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(m[i][j], m[j][i]);
}

TEST_F(CliTest, ZeroWeightsLogLiteralZeros) {
  std::string text = kTinyLm;
  text += "alpha = 0\nbeta = 0\n";
  const fs::path cfg = write_config("lm0.toml", text);
  CommandOptions o = options();
  o.config = cfg.string();
  o.out = (dir_ / "run").string();
  ASSERT_EQ(cmd_train(o), kExitOk) << err_.str();
  std::istringstream lines(read_file(dir_ / "run" / "metrics.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["L_delta"].get<double>(), 0.0);
    EXPECT_EQ(j["L_ood"].get<double>(), 0.0);
    EXPECT_NE(line.find("\"L_delta\":0,"), std::string::npos);
    ++n;
  }
  EXPECT_EQ(n, 50);
}

TEST_F(CliTest, GridHeatmapShapes) {
  const fs::path cfg = write_config(
      "grid.toml",
      "task = grid2d\npe = seqpe\nwidth = 16\nheads = 2\nencoder_heads = 2\nlayers = 1\nencoder_layers = 1\n"
      "rows = 14\ncols = 14\nsteps = 2\nbatch_size = 2\nreg_pivots = 1\nreg_batch_size = 4\n"
      "train_samples = 8\neval_samples = 8\ndistill_heads = 2\neval_extents = [\"14x14\"]\n");
  CommandOptions o = options();
  o.config = cfg.string();
  o.out = (dir_ / "run").string();
  ASSERT_EQ(cmd_train(o), kExitOk) << err_.str();
  CommandOptions h = options();
  h.checkpoint = (dir_ / "run" / "checkpoint.bin").string();
  h.anchors = parse_anchors("0:0,0:13,7:7,13:0,13:13");
  h.out = (dir_ / "maps").string();
  ASSERT_EQ(cmd_heatmap(h), kExitOk) << err_.str();
  for (const char* name : {"heatmap_0_0.csv", "heatmap_0_13.csv", "heatmap_7_7.csv", "heatmap_13_0.csv",
                           "heatmap_13_13.csv"}) {
    const std::string csv = read_file(dir_ / "maps" / name);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 14) << name;
    const std::string first = csv.substr(0, csv.find('\n'));
    EXPECT_EQ(std::count(first.begin(), first.end(), ','), 13) << name;
  }
}

TEST_F(CliTest, GradcheckPassesAndSignFlipFails) {
  const fs::path cfg = write_config("gc.toml", kTinyLm);
  CommandOptions o = options();
  o.config = cfg.string();
  EXPECT_EQ(cmd_gradcheck(o), kExitOk) << out_.str();
  const std::string report = out_.str();
  EXPECT_NE(report.find("module,max_rel_error"), std::string::npos);
  EXPECT_NE(report.find("seqpe,"), std::string::npos);
  EXPECT_NE(report.find("lm,"), std::string::npos);
  EXPECT_NE(report.find("PASS"), std::string::npos);
  o.flip_sign = true;
  EXPECT_EQ(cmd_gradcheck(o), kExitNumeric);
  EXPECT_NE(out_.str().find("FAIL"), std::string::npos);
}

TEST_F(CliTest, BadInputsExitWithConfigCode) {
  CommandOptions o = options();
  o.config = write_config("bad.toml", "bogus = 1\n").string();
  EXPECT_EQ(cmd_train(o), kExitConfig);
  EXPECT_NE(err_.str().find("line 1"), std::string::npos);
  CommandOptions e = options();
  e.checkpoint = (dir_ / "missing.bin").string();
  EXPECT_EQ(cmd_eval(e), kExitConfig);
  EXPECT_EQ(parse_anchors("1:2,3:4"), (std::vector<PositionIndex>{{1, 2}, {3, 4}}));
  EXPECT_EQ(parse_extent_list("8x8,12x12"), (std::vector<std::vector<long>>{{8, 8}, {12, 12}}));
}

}  // namespace
}  // namespace seqpe
