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
#include <random>
#include <set>

#include "afrie5/mining.hpp"
#include "oracles.hpp"

namespace afrie5 {
namespace {

TrainInstance instance(std::string query, std::vector<std::string> pos, std::vector<std::string> neg = {}) {
  TrainInstance t;
  t.query = std::move(query);
  t.pos = std::move(pos);
  t.neg = std::move(neg);
  t.meta = {LangCode("hau_Latn"), Direction::kTgtSrc, "mnli"};
  return t;
}

Matrix rows(std::initializer_list<std::vector<double>> vs) {
  Matrix m(static_cast<long>(vs.size()), static_cast<long>(vs.begin()->size()));
  long i = 0;
  for (const auto& v : vs) {
    for (std::size_t j = 0; j < v.size(); ++j) m(i, static_cast<long>(j)) = v[j];
    ++i;
  }
  return normalize_rows(m);
}

TEST(MineTest, CorpusOfPositivesOnlyLeavesInstance) {
  const auto inst = instance("q", {"a", "b"});
  MiningSettings s;
  s.window_lo = 1;
  const auto out = mine_hard_negatives(inst, {"a", "b"}, rows({{1, 0}, {0, 1}}), Eigen::RowVector2d(1, 0), s);
  EXPECT_EQ(out, inst);
}

TEST(MineTest, ZeroBudgetAndEmptyCorpus) {
  const auto inst = instance("q", {"a"});
  MiningSettings s;
  s.max_negatives = 0;
  EXPECT_EQ(mine_hard_negatives(inst, {"x"}, rows({{1, 0}}), Eigen::RowVector2d(1, 0), s), inst);
  EXPECT_EQ(mine_hard_negatives(inst, {}, Matrix(0, 2), Eigen::RowVector2d(1, 0), MiningSettings{}), inst);
}

TEST(MineTest, TopTwoByExplicitDotProducts) {
  const Matrix corpus = rows({{0.6, 0.8}, {1, 0}, {0, 1}});
  const Eigen::RowVector2d q(0.8, 0.6);
  // Oracle: dots are 0.96, 0.8, 0.6, so the best two are rows 0 and 1.
  std::vector<double> dots;
  for (long i = 0; i < 3; ++i) dots.push_back(oracle::dot({corpus(i, 0), corpus(i, 1)}, {q(0), q(1)}));
  const auto order = oracle::order_desc(dots);
  const std::vector<std::string> texts = {"c0", "c1", "c2"};
  MiningSettings s;
  s.window_lo = 1;
  s.window_hi = 3;
  s.max_negatives = 2;
  s.strategy = MiningStrategy::kTopK;
  const auto out = mine_hard_negatives(instance("q", {"p"}), texts, corpus, q, s);
  EXPECT_EQ(out.neg, (std::vector<std::string>{texts[static_cast<std::size_t>(order[0])],
                                               texts[static_cast<std::size_t>(order[1])]}));
}

TEST(MineTest, UniformSamplesOnlyFromWindow) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix corpus(40, 4);
  std::vector<std::string> texts;
  for (long i = 0; i < 40; ++i) {
    for (long j = 0; j < 4; ++j) corpus(i, j) = n(rng);
    texts.push_back("doc" + std::to_string(i));
  }
  corpus = normalize_rows(corpus);
  Eigen::RowVectorXd q(4);
  q << 0.5, 0.5, 0.5, 0.5;
  std::vector<double> dots;
  for (long i = 0; i < 40; ++i) dots.push_back(corpus.row(i).dot(q));
  const auto order = oracle::order_desc(dots);
  std::set<std::string> window;
  for (int r = 4; r < 20; ++r) window.insert(texts[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]);

  MiningSettings s;
  s.window_lo = 5;
  s.window_hi = 20;
  s.max_negatives = 6;
  std::set<std::string> seen_any;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    s.seed = seed;
    const auto inst = instance("query", {"doc0x"}, {"old"});
    const auto out = mine_hard_negatives(inst, texts, corpus, q, s);
    ASSERT_EQ(out.neg.size(), 7u);
    EXPECT_EQ(out.neg[0], "old");
    std::set<std::string> unique(out.neg.begin(), out.neg.end());
    EXPECT_EQ(unique.size(), out.neg.size());
    for (std::size_t k = 1; k < out.neg.size(); ++k) {
      EXPECT_TRUE(window.count(out.neg[k])) << out.neg[k];
      seen_any.insert(out.neg[k]);
    }
    EXPECT_EQ(mine_hard_negatives(inst, texts, corpus, q, s), out);  // same seed, same draw
    EXPECT_FALSE(validate_train_instance(out).has_value());
  }
  EXPECT_GT(seen_any.size(), 6u);  // sampling, not truncation
}

TEST(MineTest, ExcludesPositivesAndQuery) {
  const Matrix corpus = rows({{1, 0}, {0.9, 0.1}, {0.8, 0.2}, {0.7, 0.3}});
  MiningSettings s;
  s.window_lo = 1;
  s.max_negatives = 10;
  const auto out = mine_hard_negatives(instance("c1", {"c0"}), {"c0", "c1", "c2", "c2"}, corpus, Eigen::RowVector2d(1, 0), s);
  EXPECT_EQ(out.neg, std::vector<std::string>{"c2"});
  s.exclude_exact_duplicates = false;
  const auto kept = mine_hard_negatives(instance("c1", {"c0"}), {"c0", "c1", "c2"}, corpus.topRows(3),
                                        Eigen::RowVector2d(1, 0), s);
  EXPECT_EQ(kept.neg, (std::vector<std::string>{"c1", "c2"}));
}

TEST(MineTest, ErrorsAndResetScores) {
  auto inst = instance("q", {"p"}, {"n"});
  inst.teacher_scores = std::vector<double>{1, 0};
  MiningSettings s;
  EXPECT_THROW(mine_hard_negatives(inst, {"a"}, rows({{1, 0, 0}}), Eigen::RowVector2d(1, 0), s), ValidationError);
  EXPECT_THROW(mine_hard_negatives(inst, {"a", "b"}, rows({{1, 0}}), Eigen::RowVector2d(1, 0), s), ValidationError);
  s.window_lo = 0;
  EXPECT_THROW(mine_hard_negatives(inst, {"a"}, rows({{1, 0}}), Eigen::RowVector2d(1, 0), s), ValidationError);
  s.window_lo = 1;
  const auto out = mine_hard_negatives(inst, {"a"}, rows({{1, 0}}), Eigen::RowVector2d(1, 0), s);
  EXPECT_FALSE(out.teacher_scores.has_value());
}

TEST(ScoreTeacherTest, ConstantSingleMember) {
  ConstantTeacher zero(0.0);
  const auto out = score_teacher(instance("q", {"p"}), zero);
  EXPECT_EQ(out.teacher_scores, std::vector<double>{0.0});
}

class StubTeacher : public TeacherPort {
 public:
  std::vector<double> score(const std::vector<QueryPassage>& pairs) override {
    std::vector<double> out;
    for (const auto& [q, p] : pairs) out.push_back(p.rfind("pos", 0) == 0 ? 1.0 : -1.0);
    return out;
  }
};

TEST(ScoreTeacherTest, StubPassthroughPreservesTexts) {
  StubTeacher t;
  const auto inst = instance("q", {"pos", "pos2"}, {"n1", "n2"});
  const auto out = score_teacher(inst, t);
  EXPECT_EQ(out.teacher_scores, (std::vector<double>{1.0, -1.0, -1.0}));
  EXPECT_EQ(out.query, inst.query);
  EXPECT_EQ(out.pos, inst.pos);
  EXPECT_EQ(out.neg, inst.neg);
}

TEST(ScoreTeacherTest, DotTeacherEqualsIndependentDots) {
  FileEncoder enc;
  enc.add_text("q", {1, 2, 2});
  enc.add_text("p", {0, 1, 0});
  enc.add_text("n1", {1, 0, 0});
  enc.add_text("n2", {2, 2, 1});
  enc.add_text("n3", {0, 0, -1});
  auto shared = std::make_unique<FileEncoder>(enc);
  DotTeacher t(std::move(shared));
  const auto out = score_teacher(instance("q", {"p"}, {"n1", "n2", "n3"}), t);
  auto unit = [](std::vector<double> v) {
    double n = std::sqrt(oracle::dot(v, v));
    for (auto& x : v) x /= n;
    return v;
  };
  const auto q = unit({1, 2, 2});
  const std::vector<double> expected = {oracle::dot(q, unit({0, 1, 0})), oracle::dot(q, unit({1, 0, 0})),
                                        oracle::dot(q, unit({2, 2, 1})), oracle::dot(q, unit({0, 0, -1}))};
  ASSERT_TRUE(out.teacher_scores.has_value());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR((*out.teacher_scores)[i], expected[i], 1e-12);
}

class FailingTeacher : public TeacherPort {
 public:
  std::vector<double> score(const std::vector<QueryPassage>&) override { throw std::runtime_error("offline"); }
};

TEST(ScoreTeacherTest, FailureLeavesInputUntouched) {
  FailingTeacher t;
  const auto inst = instance("q", {"p"}, {"n"});
  const auto copy = inst;
  EXPECT_THROW(score_teacher(inst, t), RuntimeError);
  EXPECT_EQ(inst, copy);
}

TEST(ScoreTeacherTest, FileTeacherKeyedByPairHash) {
  const auto path = std::filesystem::temp_directory_path() / "afrie5_teacher_scores.jsonl";
  write_file(path.string(), "{\"query\":\"q\",\"passage\":\"p\",\"score\":2.5}\n{\"hash\":\"" + pair_hash("q", "n") +
                                "\",\"score\":-0.5}\n");
  auto t = make_teacher("file:" + path.string());
  const auto out = score_teacher(instance("q", {"p"}, {"n"}), *t);
  EXPECT_EQ(out.teacher_scores, (std::vector<double>{2.5, -0.5}));
  EXPECT_THROW(score_teacher(instance("q", {"p"}, {"other"}), *t), RuntimeError);
  std::filesystem::remove(path);
  EXPECT_THROW(make_teacher("oracle:1"), ValidationError);
  EXPECT_THROW(make_teacher("const:x"), ValidationError);
}

}  // namespace
}  // namespace afrie5
