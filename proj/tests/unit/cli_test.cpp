/**
 * Copyright 2026 The MixIT Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mixit/checkpoint.hpp"
#include "json.hpp"
#include "mixit/manifest.hpp"
#include "mixit/wav.hpp"

namespace mixit {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<json> jsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

const std::vector<std::string> kTinyModel = {
    "--num-outputs", "4", "--basis-size", "16", "--kernel-size", "8", "--blocks", "2",
    "--bottleneck", "8", "--conv-channels", "16", "--dilation-period", "2", "--skip-edges", "none"};

class CliTest : public ::testing::Test {
 protected:
  fs::path dir_;

  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mixit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  int run(std::vector<std::string> args) { return cli::run(args); }

  int synth(const std::string& out, const std::string& n, const std::string& sources,
            const std::string& seed, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"synth-data", "--out", p(out), "--num-mixtures", n,
                               "--sources-per-mixture", sources, "--seed", seed, "--duration", "0.1"};
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  }

  int train(const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"train", "--out", p(out), "--batch-size", "4", "--lr", "3e-3"};
    a.insert(a.end(), kTinyModel.begin(), kTinyModel.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  }
};

TEST_F(CliTest, SynthCountContractAndDeterminism) {
  ASSERT_EQ(synth("a", "100", "1:2", "7"), 0);
  const auto records = read_manifest(dir_ / "a" / "manifest.jsonl");
  ASSERT_EQ(records.size(), 100u);
  for (const auto& r : records) {
    ASSERT_TRUE(r.refs);
    EXPECT_GE(r.refs->size(), 1u);
    EXPECT_LE(r.refs->size(), 2u);
  }
  ASSERT_EQ(synth("b", "100", "1:2", "7"), 0);
  for (const auto& r : records) {
    EXPECT_EQ(slurp(dir_ / "a" / r.path), slurp(dir_ / "b" / r.path));
  }
  ASSERT_EQ(synth("c", "10", "2:2", "8"), 0);
  for (const auto& r : read_manifest(dir_ / "c" / "manifest.jsonl")) EXPECT_EQ(r.refs->size(), 2u);
  const json cfg = json::parse(slurp(dir_ / "a" / "run_config.json"));
  EXPECT_EQ(cfg["resolved"]["seed"], 7);
}

TEST_F(CliTest, UsageAndDataErrors) {
  EXPECT_EQ(run({}), cli::kExitUsage);
  EXPECT_EQ(run({"synth-data"}), cli::kExitUsage);
  EXPECT_EQ(run({"train", "--bogus"}), cli::kExitUsage);
  EXPECT_EQ(run({"synth-data", "--out", p("x"), "--sources-per-mixture", "3:1"}), cli::kExitUsage);
  EXPECT_EQ(train("t", {"--train-manifest", p("missing/manifest.jsonl"), "--steps", "1"}),
            cli::kExitData);
  EXPECT_EQ(run({"--help"}), cli::kExitOk);
}

TEST_F(CliTest, SupervisedModeMatchesFullySupervisedSemi) {
  ASSERT_EQ(synth("d", "16", "1:2", "1"), 0);
  const std::string m = p("d/manifest.jsonl");
  ASSERT_EQ(train("sup", {"--train-manifest", m, "--mode", "supervised", "--steps", "6",
                          "--eval-every", "3", "--val-manifest", m}),
            0);
  ASSERT_EQ(train("semi", {"--train-manifest", m, "--mode", "semi", "--supervised-frac", "1.0",
                           "--steps", "6", "--eval-every", "3", "--val-manifest", m}),
            0);
  auto a = jsonl(dir_ / "sup" / "train_log.jsonl"), b = jsonl(dir_ / "semi" / "train_log.jsonl");
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].erase("wall_s");
    b[i].erase("wall_s");
    EXPECT_EQ(a[i], b[i]);
  }
  // Identical except for the recorded mode name.
  Checkpoint ca = load_checkpoint(dir_ / "sup" / "final.ckpt");
  Checkpoint cb = load_checkpoint(dir_ / "semi" / "final.ckpt");
  EXPECT_EQ(ca.metadata.at("mode"), "supervised");
  cb.metadata["mode"] = "supervised";
  EXPECT_EQ(encode_checkpoint(ca), encode_checkpoint(cb));
}

TEST_F(CliTest, UnsupervisedTrainingOnReferenceFreeManifest) {
  ASSERT_EQ(synth("u", "32", "1:2", "2", {"--no-refs"}), 0);
  ASSERT_EQ(train("run", {"--train-manifest", p("u/manifest.jsonl"), "--val-manifest",
                          p("u/manifest.jsonl"), "--mode", "unsupervised", "--steps", "1000",
                          "--eval-every", "500"}),
            0);
  for (const char* f : {"run_config.json", "train_log.jsonl", "final.ckpt", "best.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  const auto log = jsonl(dir_ / "run" / "train_log.jsonl");
  ASSERT_EQ(log.size(), 1000u);
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < 100; ++i) early += log[i]["loss_db"].get<double>();
  for (std::size_t i = 900; i < 1000; ++i) late += log[i]["loss_db"].get<double>();
  EXPECT_LT(late, early);
  EXPECT_TRUE(log[499]["val_metric"].is_number());
  EXPECT_TRUE(log[0]["val_metric"].is_null());
  const json cfg = json::parse(slurp(dir_ / "run" / "run_config.json"));
  EXPECT_EQ(cfg["resolved"]["validation_metric"], "momi");
  EXPECT_DOUBLE_EQ(cfg["resolved"]["tau"].get<double>(), 1e-3);
}

TEST_F(CliTest, SeparateEvaluateAnalyze) {
  ASSERT_EQ(synth("e", "12", "1:2", "3"), 0);
  const std::string m = p("e/manifest.jsonl");
  ASSERT_EQ(train("r", {"--train-manifest", m, "--mode", "supervised", "--steps", "4"}), 0);
  const auto records = read_manifest(m);

  // separate: M files that sum to the input; repeatable.
  ASSERT_EQ(run({"separate", "--checkpoint", p("r/final.ckpt"), "--input", p("e/" + records[0].path),
                 "--out-dir", p("sep1")}),
            0);
  ASSERT_EQ(run({"separate", "--checkpoint", p("r/final.ckpt"), "--input", p("e/" + records[0].path),
                 "--out-dir", p("sep2")}),
            0);
  const Waveform x = read_wav(dir_ / "e" / records[0].path);
  std::vector<double> sum(x.size(), 0.0);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "source_" + std::to_string(i) + ".wav";
    ASSERT_TRUE(fs::exists(dir_ / "sep1" / name));
    EXPECT_EQ(slurp(dir_ / "sep1" / name), slurp(dir_ / "sep2" / name));
    const Waveform s = read_wav(dir_ / "sep1" / name);
    for (std::size_t t = 0; t < x.size(); ++t) sum[t] += s.samples()[t];
  }
  EXPECT_FALSE(fs::exists(dir_ / "sep1" / "source_4.wav"));
  double err = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) err += (sum[t] - x.samples()[t]) * (sum[t] - x.samples()[t]);
  EXPECT_LT(std::sqrt(err / x.energy()), 1e-4);

  // Sample-rate mismatch.
  write_wav(dir_ / "x16.wav", Waveform(std::vector<double>(1600, 0.1), 16000));
  EXPECT_EQ(run({"separate", "--checkpoint", p("r/final.ckpt"), "--input", p("x16.wav"), "--out-dir",
                 p("sep3")}),
            cli::kExitData);

  // evaluate with the pass-through baseline.
  ASSERT_EQ(run({"evaluate", "--identity", "--manifest", m, "--metrics", "msi,ss,sisnri", "--out-dir",
                 p("ev_id")}),
            0);
  for (const auto& rec : jsonl(dir_ / "ev_id" / "eval_report.jsonl")) {
    if (!rec.contains("example_id")) continue;  // summary line
    const auto& id = rec["example_id"].get<std::string>();
    const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.path == id; });
    ASSERT_NE(it, records.end());
    const bool single = it->refs->size() == 1;
    if (rec["metric"] == "ss") EXPECT_EQ(rec["value_db"].is_null(), !single);
    if (rec["metric"] == "msi" && single) EXPECT_NEAR(rec["value_db"].get<double>(), 0.0, 1e-9);
  }
  ASSERT_EQ(run({"evaluate", "--checkpoint", p("r/final.ckpt"), "--manifest", m, "--metrics", "msi,momi",
                 "--out-dir", p("ev_model")}),
            0);

  // analyze: identical reports -> zero spread; a metric correlates with itself.
  ASSERT_EQ(run({"analyze", "--report", p("ev_model/eval_report.jsonl"), "--report",
                 p("ev_model/eval_report.jsonl"), "--metric", "msi", "--correlate", "msi,msi", "--out-dir",
                 p("an")}),
            0);
  const json an = json::parse(slurp(dir_ / "an" / "analysis.json"));
  EXPECT_NEAR(an["within_condition_std"]["msi"]["normalized_std_db"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(an["correlation"][0]["pearson"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(an["correlation"][0]["spearman"].get<double>(), 1.0, 1e-12);
}

TEST_F(CliTest, ReferenceFreeEvaluation) {
  ASSERT_EQ(synth("n", "8", "1:2", "4", {"--no-refs"}), 0);
  const std::string m = p("n/manifest.jsonl");
  EXPECT_EQ(run({"evaluate", "--identity", "--manifest", m, "--metrics", "momi", "--out-dir", p("ev")}), 0);
  const auto rows = jsonl(dir_ / "ev" / "eval_report.jsonl");
  std::size_t momi_rows = 0;
  for (const auto& r : rows) momi_rows += r.value("metric", "") == "momi" ? 1 : 0;
  EXPECT_EQ(momi_rows, 4u);
  EXPECT_EQ(run({"evaluate", "--identity", "--manifest", m, "--metrics", "msi", "--out-dir", p("ev2")}),
            cli::kExitData);
  EXPECT_EQ(run({"evaluate", "--identity", "--manifest", m, "--metrics", "pesq", "--out-dir", p("ev3")}),
            cli::kExitUsage);
}

TEST_F(CliTest, RerunReproducesOutputs) {
  ASSERT_EQ(synth("s", "5", "1:2", "9"), 0);
  const std::string before = slurp(dir_ / "s" / "mix_00003.wav");
  fs::remove(dir_ / "s" / "mix_00003.wav");
  ASSERT_EQ(run({"rerun", p("s/run_config.json")}), 0);
  EXPECT_EQ(slurp(dir_ / "s" / "mix_00003.wav"), before);
}

}  // namespace
}  // namespace mixit
