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

#include <random>
#include <set>
#include <string>

#include "afrie5/datamodel.hpp"

namespace afrie5 {
namespace {

TEST(LangCodeTest, AcceptsIsoPlusScript) {
  EXPECT_TRUE(LangCode::is_valid("amh_Ethi"));
  EXPECT_TRUE(LangCode::is_valid("swh_Latn"));
  EXPECT_FALSE(LangCode::is_valid("amh_ethi"));
  EXPECT_FALSE(LangCode::is_valid("AMH_Ethi"));
  EXPECT_FALSE(LangCode::is_valid("am_Ethi"));
  EXPECT_FALSE(LangCode::is_valid("amh-Ethi"));
  EXPECT_THROW(LangCode("eng"), ValidationError);
}

TEST(ParseNliTest, SingleEntailmentLine) {
  const auto v = parse_nli_lines(
      R"({"id":"a1","premise":"p","hypothesis":"h","label":"entailment","source":"mnli"})"
      "\n");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].label, Label::kEntailment);
  EXPECT_EQ(v[0].source, NliSource::kMnli);
  EXPECT_EQ(v[0].id, "a1");
}

TEST(ParseNliTest, EmptyStream) { EXPECT_TRUE(parse_nli_lines("").empty()); }

TEST(ParseNliTest, UnknownLabelNamesLine) {
  try {
    parse_nli_lines(R"({"id":"a","premise":"p","hypothesis":"h","label":"entails","source":"snli"})");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown label at line 1"), std::string::npos) << e.what();
  }
}

TEST(ParseNliTest, MalformedLineNamesLineAndField) {
  const std::string data =
      R"({"id":"a","premise":"p","hypothesis":"h","label":"neutral","source":"snli"})"
      "\n"
      R"({"id":"b","hypothesis":"h","label":"neutral","source":"snli"})";
  try {
    parse_nli_lines(data);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("premise"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_nli_lines("{not json"), ValidationError);
  EXPECT_THROW(parse_nli_lines(R"({"id":"a","premise":"","hypothesis":"h","label":"neutral","source":"snli"})"),
               ValidationError);
}

TEST(ParseNliTest, RoundTripIsCanonical) {
  // Keys out of order and extra whitespace; the canonical form is the sorted compact dump.
  const std::vector<std::string> lines = {
      R"({ "source": "snli", "label": "contradiction", "hypothesis": "b", "premise": "a", "id": "x" })",
      R"({"premise":"Ɛ̃ café","id":"y","hypothesis":"c","source":"mnli","label":"neutral"})",
  };
  std::string data, canonical;
  for (const auto& l : lines) {
    data += l + "\n";
    canonical += json::parse(l).dump() + "\n";
  }
  const auto parsed = parse_nli_lines(data);
  EXPECT_EQ(to_jsonl(parsed), canonical);
  EXPECT_EQ(parse_nli_lines(to_jsonl(parsed)), parsed);
}

TEST(TranslationRecordTest, AbsentScoreDiffersFromZero) {
  const auto recs = parse_translation_lines(
      R"({"example_id":"a","side":"premise","lang":"hau_Latn","text":"t","qe_score":0.0})"
      "\n"
      R"({"example_id":"a","side":"hypothesis","lang":"hau_Latn","text":"u"})"
      "\n");
  ASSERT_EQ(recs.size(), 2u);
  ASSERT_TRUE(recs[0].qe_score.has_value());
  EXPECT_EQ(*recs[0].qe_score, 0.0);
  EXPECT_FALSE(recs[1].qe_score.has_value());
  EXPECT_EQ(parse_translation_lines(to_jsonl(recs)), recs);
  EXPECT_THROW(parse_translation_lines(
                   R"({"example_id":"a","side":"premise","lang":"hau_Latn","text":"t","qe_score":1.5})"),
               ValidationError);
}

TEST(ValidateInstanceTest, Examples) {
  TrainInstance a;
  a.pos = {"a"};
  EXPECT_FALSE(validate_train_instance(a).has_value());

  TrainInstance b = a;
  b.neg = {"a"};
  EXPECT_EQ(validate_train_instance(b).value_or(""), "pos/neg overlap");

  TrainInstance c = a;
  c.neg = {"b"};
  c.teacher_scores = std::vector<double>{1, 2, 3};
  EXPECT_EQ(validate_train_instance(c).value_or(""), "score length");
}

TEST(ValidateInstanceTest, OverlapComparesAfterNfc) {
  TrainInstance t;
  t.pos = {"caf\xC3\xA9"};    // precomposed e-acute
  t.neg = {"cafe\xCC\x81"};   // e + combining acute
  EXPECT_EQ(validate_train_instance(t).value_or(""), "pos/neg overlap");
}

// Independent statement of the invariants over generated instances.
TEST(ValidateInstanceTest, AcceptsExactlyTheValidSet) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> pool = {"a", "b", "c", "d"};
  int accepted = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    TrainInstance t;
    for (const auto& s : pool) {
      if (rng() % 3 == 0) t.pos.push_back(s);
      if (rng() % 3 == 0) t.neg.push_back(s);
    }
    if (rng() % 2) t.teacher_scores = std::vector<double>(rng() % 5, 0.5);
    bool valid = !t.pos.empty();
    if (t.teacher_scores && t.teacher_scores->size() != 1 + t.neg.size()) valid = false;
    for (const auto& n : t.neg) {
      for (const auto& p : t.pos) valid = valid && n != p;
    }
    EXPECT_EQ(!validate_train_instance(t).has_value(), valid);
    accepted += valid;
  }
  EXPECT_GT(accepted, 50);
}

TEST(TrainInstanceTest, JsonRoundTrip) {
  TrainInstance t;
  t.query = "q";
  t.pos = {"p"};
  t.neg = {"n1", "n2"};
  t.teacher_scores = std::vector<double>{0.5, -1.0, 2.0};
  t.meta = {LangCode("yor_Latn"), Direction::kTgtSrc, "snli"};
  const std::string line = to_jsonl(std::vector<TrainInstance>{t});
  const auto back = parse_train_lines(line);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], t);
  EXPECT_EQ(to_jsonl(back), line);
  EXPECT_THROW(parse_train_lines(R"({"query":"q","pos":["a"],"neg":["a"],"meta":{"lang":"eng_Latn","direction":"SRC_SRC","source":"mnli"}})"),
               ValidationError);
}

TEST(DirectionTest, NamesRoundTrip) {
  for (Direction d : kAllDirections) EXPECT_EQ(parse_direction(to_string(d)), d);
  EXPECT_FALSE(parse_direction("TGT").has_value());
  EXPECT_TRUE(premise_translated(Direction::kTgtSrc));
  EXPECT_FALSE(hypothesis_translated(Direction::kTgtSrc));
  EXPECT_TRUE(hypothesis_translated(Direction::kSrcTgt));
  EXPECT_FALSE(premise_translated(Direction::kSrcSrc) || hypothesis_translated(Direction::kSrcSrc));
}

}  // namespace
}  // namespace afrie5
