// Copyright 2026 The AfriE5 Toolkit Authors.
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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "afrie5/cli.hpp"
#include "oracles.hpp"

namespace afrie5 {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int rc = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "afrie5");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("afrie5_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

TEST(CliTest, SelftestPasses) {
  const auto r = run({"selftest"});
  EXPECT_EQ(r.rc, 0) << r.out;
  for (const auto& line : split_lines(r.out)) {
    if (!line.empty()) {
      EXPECT_EQ(line.rfind("PASS ", 0), 0u) << line;
    }
  }
}

TEST(CliTest, NegativeLearningRateIsUsageError) {
  const auto r = run({"train", "--lr", "-1", "--data", "x.jsonl", "--out", "unused"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_TRUE(contains(r.err, "learning_rate must be positive")) << r.err;
}

TEST(CliTest, UnknownSubcommandPrintsUsage) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_TRUE(contains(r.err, "build-data")) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(run({}).rc, 1);
}

TEST(CliTest, MissingRequiredOptionsAreValidationErrors) {
  EXPECT_EQ(run({"mine", "--out", "x"}).rc, 1);
  EXPECT_EQ(run({"evaluate", "--out", "x"}).rc, 1);
  EXPECT_EQ(run({"build-data", "--langs", "hau_Latn,bogus", "--synthetic", "2", "--out", "x"}).rc, 1);
  EXPECT_EQ(run({"report"}).rc, 1);
}

TEST(CliTest, BadEncoderSpecIsValidationError) {
  const auto dir = fresh_dir("badenc");
  const auto r = run({"evaluate", "--encoder", "bert:base", "--out", (dir / "e").string()});
  EXPECT_EQ(r.rc, 1);
  fs::remove_all(dir);
}

// A custom manifest backed by files plus a lookup encoder whose vectors separate the labels.
struct FileSuite {
  fs::path dir, manifest, encoder;
};

FileSuite write_file_suite(const std::string& name) {
  FileSuite s;
  s.dir = fresh_dir(name);
  std::string clf;
  FileEncoder enc;
  for (int i = 0; i < 12; ++i) {
    const std::string text = "item " + std::to_string(i);
    const bool pos = i % 2 == 0;
    clf += json{{"text", text}, {"label", pos ? "p" : "n"}, {"split", i < 8 ? "train" : "test"}}.dump() + "\n";
    enc.add_text(text, {pos ? 1.0 : -1.0, 0.1 * i});
  }
  std::string btxt;
  for (int i = 0; i < 4; ++i) {
    const std::string src = "s" + std::to_string(i), tgt = "t" + std::to_string(i);
    btxt += json{{"src", src}, {"tgt", tgt}}.dump() + "\n";
    std::vector<double> v(2, 0.0);
    v[0] = std::cos(i);
    v[1] = std::sin(i);
    enc.add_text(src, v);
    // Targets 2 and 3 swap, so half of the alignments are wrong.
    const int j = i >= 2 ? 5 - i : i;
    enc.add_text(tgt, {std::cos(j), std::sin(j)});
  }
  write_file((s.dir / "clf.jsonl").string(), clf);
  write_file((s.dir / "btxt.jsonl").string(), btxt);
  const json m{{"suite", "custom"},
               {"aggregation", "task_macro"},
               {"tasks",
                {{{"name", "Topics"}, {"family", "Clf"}, {"metric", "accuracy"}, {"languages", {"hau_Latn"}},
                  {"source", "clf.jsonl"}},
                 {{"name", "Pairs"}, {"family", "Btxt"}, {"metric", "f1"}, {"languages", {"hau_Latn"}},
                  {"source", "btxt.jsonl"}}}}};
  s.manifest = s.dir / "suite.json";
  s.encoder = s.dir / "enc.jsonl";
  write_file(s.manifest.string(), m.dump(2));
  write_file(s.encoder.string(), enc.to_jsonl());
  return s;
}

TEST(CliTest, EvaluateAndReportWithFileEncoder) {
  const auto s = write_file_suite("evaluate");
  const std::string out_dir = (s.dir / "run").string();
  const auto r = run({"evaluate", "--suite", s.manifest.string(), "--encoder", "file:" + s.encoder.string(), "--run",
                      "stub", "--out", out_dir});
  ASSERT_EQ(r.rc, 0) << r.err;
  const Summary sum = summary_from_json(json::parse(read_file(out_dir + "/scores.json")));
  ASSERT_EQ(sum.tasks.size(), 2u);
  EXPECT_NEAR(sum.tasks[0].mean, 100.0, 1e-9);  // labels separate on the first coordinate
  EXPECT_NEAR(sum.tasks[1].mean, 50.0, 1e-9);   // two of four alignments correct
  EXPECT_NEAR(sum.overall, oracle::mean({sum.tasks[0].mean, sum.tasks[1].mean}), 1e-9);

  const auto rep = run({"report", out_dir});
  ASSERT_EQ(rep.rc, 0) << rep.err;
  const auto lines = split_lines(rep.out);
  ASSERT_GE(lines.size(), 3u);
  EXPECT_TRUE(contains(lines[0], "Avg"));
  EXPECT_TRUE(contains(lines[2], "stub"));
  EXPECT_TRUE(contains(lines[2], "75.0"));

  const auto machine = run({"report", "--format", "machine", out_dir});
  EXPECT_EQ(summary_from_json(json::parse(machine.out)), sum);
  EXPECT_TRUE(fs::exists(out_dir + "/evaluate.resolved_config.toml"));
  EXPECT_TRUE(fs::exists(out_dir + "/evaluate.run_meta.json"));
  fs::remove_all(s.dir);
}

TEST(CliTest, ScoresAreByteIdenticalAcrossRuns) {
  const auto dir = fresh_dir("repeat");
  std::string first;
  for (int k = 0; k < 2; ++k) {
    const std::string out = (dir / ("run" + std::to_string(k))).string();
    const auto r = run({"evaluate", "--suite", "lite-synthetic", "--encoder", "toy:7:16", "--run", "toy", "--out", out});
    ASSERT_EQ(r.rc, 0) << r.err;
    const std::string scores = read_file(out + "/scores.json");
    if (k == 0) {
      first = scores;
    } else {
      EXPECT_EQ(scores, first);
    }
    EXPECT_EQ(read_file(out + "/evaluate.resolved_config.toml").find("toy:7:16") != std::string::npos, true);
  }
  fs::remove_all(dir);
}

TEST(CliTest, PipelineAndConfigReload) {
  const auto dir = fresh_dir("pipeline");
  const std::string data = (dir / "data" / "train.jsonl").string();
  auto r = run({"build-data", "--synthetic", "6", "--synthetic-qe-min", "0.75", "--langs", "hau_Latn,swh_Latn", "--out",
                data});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto instances = parse_train_lines(read_file(data));
  ASSERT_FALSE(instances.empty());

  // Reloading the resolved config reproduces the output byte for byte.
  const std::string again = (dir / "again" / "train.jsonl").string();
  r = run({"--config", (dir / "data" / "build-data.resolved_config.toml").string(), "build-data", "--out", again});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(read_file(again), read_file(data));

  std::string corpus;
  for (const auto& inst : instances)
    for (const auto& p : inst.pos) corpus += json{{"text", p}}.dump() + "\n";
  write_file((dir / "corpus.jsonl").string(), corpus);
  const std::string mined = (dir / "mined.jsonl").string();
  r = run({"mine", "--in", data, "--corpus", (dir / "corpus.jsonl").string(), "--window", "1:50", "--max-neg", "3",
           "--out", mined});
  ASSERT_EQ(r.rc, 0) << r.err;
  const std::string scored = (dir / "scored.jsonl").string();
  r = run({"score-teacher", "--in", mined, "--teacher", "const:0", "--out", scored});
  ASSERT_EQ(r.rc, 0) << r.err;
  for (const auto& inst : parse_train_lines(read_file(scored))) {
    ASSERT_TRUE(inst.teacher_scores.has_value());
    EXPECT_EQ(inst.teacher_scores->size(), 1 + inst.neg.size());
  }
  const std::string model = (dir / "model").string();
  r = run({"train", "--data", scored, "--batch-size", "4", "--group-size", "4", "--log-every", "1", "--out", model});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(fs::exists(model + "/model.ckpt"));
  EXPECT_TRUE(fs::exists(model + "/metrics.jsonl"));
  const std::string toml = read_file(model + "/train.resolved_config.toml");
  EXPECT_TRUE(contains(toml, "[train]"));
  EXPECT_TRUE(contains(toml, "same-dataset-within-batch = true"));
  EXPECT_FALSE(contains(toml, "started_at"));
  EXPECT_TRUE(contains(read_file(model + "/train.run_meta.json"), "started_at"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace afrie5
