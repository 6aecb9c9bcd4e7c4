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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "afrie5/datamodel.hpp"
#include "afrie5/encoder.hpp"
#include "afrie5/error.hpp"
#include "afrie5/linalg.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

inline constexpr int kDefaultMaxNegatives = 15;

enum class MiningStrategy {
  kUniform,  // uniform sample without replacement from the rank window
  kTopK,     // best-ranked candidates in the window
};

struct MiningSettings {
  int max_negatives = kDefaultMaxNegatives;
  int window_lo = 2;  // 1-based inclusive rank bounds
  int window_hi = 100;
  std::uint64_t seed = 13;
  bool exclude_exact_duplicates = true;
  MiningStrategy strategy = MiningStrategy::kUniform;

  void validate() const {
    if (window_lo < 1 || window_lo > window_hi) throw ValidationError("mining window must satisfy 1 <= lo <= hi");
    if (max_negatives < 0) throw ValidationError("max_negatives must be non-negative");
  }
};

/// Ranks the corpus by dot product with the query embedding (ties by lowest index) and returns
/// corpus indices in rank order.
inline std::vector<int> rank_corpus(const Matrix& corpus_embeddings, const Eigen::RowVectorXd& query) {
  const Vector sims = corpus_embeddings * query.transpose();
  std::vector<int> order(static_cast<std::size_t>(sims.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sims(a) > sims(b); });
  return order;
}

/// Appends mined hard negatives. Candidates come from the rank window, minus the instance's
/// positives, existing negatives and (optionally) copies of the query. Any teacher scores are
/// dropped because the group changed; score after mining.
inline TrainInstance mine_hard_negatives(const TrainInstance& inst, const std::vector<std::string>& corpus,
                                         const Matrix& corpus_embeddings, const Eigen::RowVectorXd& query_embedding,
                                         const MiningSettings& settings) {
  settings.validate();
  if (corpus.empty()) return inst;
  if (static_cast<std::size_t>(corpus_embeddings.rows()) != corpus.size()) {
    throw ValidationError("corpus embeddings are not row-aligned with the corpus");
  }
  if (corpus_embeddings.cols() != query_embedding.size()) {
    throw ValidationError("mining: query and corpus embedding dimensions differ");
  }
  if (settings.max_negatives == 0) return inst;

  std::set<std::string> excluded;
  for (const auto& p : inst.pos) excluded.insert(nfc(p));
  for (const auto& n : inst.neg) excluded.insert(nfc(n));
  if (settings.exclude_exact_duplicates) excluded.insert(nfc(inst.query));

  const std::vector<int> order = rank_corpus(corpus_embeddings, query_embedding);
  const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(settings.window_hi), order.size());
  std::vector<std::string> candidates;
  for (std::size_t r = static_cast<std::size_t>(settings.window_lo) - 1; r < hi; ++r) {
    std::string text = nfc(corpus[static_cast<std::size_t>(order[r])]);
    if (excluded.insert(text).second) candidates.push_back(std::move(text));
  }

  const std::size_t budget = std::min<std::size_t>(static_cast<std::size_t>(settings.max_negatives), candidates.size());
  std::vector<std::size_t> picked(candidates.size());
  std::iota(picked.begin(), picked.end(), 0);
  if (settings.strategy == MiningStrategy::kUniform && budget < candidates.size()) {
    // Partial Fisher-Yates, seeded per instance so instances draw independently.
    std::mt19937_64 rng(settings.seed ^ fnv1a(inst.query));
    for (std::size_t i = 0; i < budget; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, picked.size() - 1);
      std::swap(picked[i], picked[pick(rng)]);
    }
  }
  picked.resize(budget);
  std::sort(picked.begin(), picked.end());  // keep rank order in the output

  TrainInstance out = inst;
  out.teacher_scores.reset();
  for (std::size_t idx : picked) out.neg.push_back(candidates[idx]);
  return out;
}

// ---------------------------------------------------------------------------
// Teacher scoring

using QueryPassage = std::pair<std::string, std::string>;

class TeacherPort {
 public:
  virtual ~TeacherPort() = default;
  /// Aligned raw scores, one per (query, passage) pair.
  virtual std::vector<double> score(const std::vector<QueryPassage>& pairs) = 0;
};

/// Fills teacher_scores for the group [pos[0]] ++ neg. The input is never modified; any
/// teacher failure surfaces as an error.
inline TrainInstance score_teacher(const TrainInstance& inst, TeacherPort& teacher) {
  if (inst.pos.empty()) throw ValidationError("score_teacher: instance has no positive");
  std::vector<QueryPassage> pairs;
  pairs.reserve(1 + inst.neg.size());
  pairs.emplace_back(inst.query, inst.pos.front());
  for (const auto& n : inst.neg) pairs.emplace_back(inst.query, n);
  std::vector<double> scores;
  try {
    scores = teacher.score(pairs);
  } catch (const std::exception& e) {
    throw RuntimeError(std::string("teacher failed: ") + e.what());
  }
  if (scores.size() != pairs.size()) throw RuntimeError("teacher returned the wrong number of scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw RuntimeError("teacher returned a non-finite score");
  }
  TrainInstance out = inst;
  out.teacher_scores = std::move(scores);
  return out;
}

class ConstantTeacher : public TeacherPort {
 public:
  explicit ConstantTeacher(double value) : value_(value) {}
  std::vector<double> score(const std::vector<QueryPassage>& pairs) override {
    return std::vector<double>(pairs.size(), value_);
  }

 private:
  double value_;
};

/// Dot product of encoder embeddings of the query and passage.
class DotTeacher : public TeacherPort {
 public:
  explicit DotTeacher(std::unique_ptr<EncoderPort> encoder) : encoder_(std::move(encoder)) {}
  std::vector<double> score(const std::vector<QueryPassage>& pairs) override {
    std::vector<std::string> queries;
    std::vector<std::string> passages;
    for (const auto& [q, p] : pairs) {
      queries.push_back(q);
      passages.push_back(p);
    }
    const Matrix qe = encoder_->embed(queries);
    const Matrix pe = encoder_->embed(passages);
    std::vector<double> out(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out[i] = qe.row(static_cast<Eigen::Index>(i)).dot(pe.row(static_cast<Eigen::Index>(i)));
    }
    return out;
  }

 private:
  std::unique_ptr<EncoderPort> encoder_;
};

/// Score file lookup keyed by pair_hash(query, passage).
/// Lines: {"hash": str, "score": float} or {"query": str, "passage": str, "score": float}.
class FileTeacher : public TeacherPort {
 public:
  FileTeacher() = default;

  static FileTeacher load(const std::string& path) {
    FileTeacher t;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (detail::blank(lines[i])) continue;
      const json j = detail::parse_json_line(lines[i], i + 1);
      const json& s = detail::field(j, "score", i + 1);
      if (!s.is_number()) throw ValidationError(path + ": score must be a number at line " + std::to_string(i + 1));
      if (j.contains("hash")) {
        t.scores_[detail::string_field(j, "hash", i + 1)] = s.get<double>();
      } else {
        t.add(detail::string_field(j, "query", i + 1), detail::string_field(j, "passage", i + 1), s.get<double>());
      }
    }
    return t;
  }

  void add(const std::string& query, const std::string& passage, double score) {
    scores_[pair_hash(query, passage)] = score;
  }

  std::vector<double> score(const std::vector<QueryPassage>& pairs) override {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [q, p] : pairs) {
      auto it = scores_.find(pair_hash(q, p));
      if (it == scores_.end()) throw RuntimeError("no teacher score for pair hash " + pair_hash(q, p));
      out.push_back(it->second);
    }
    return out;
  }

  std::string to_jsonl() const {
    std::map<std::string, double> sorted(scores_.begin(), scores_.end());
    std::string out;
    for (const auto& [h, s] : sorted) {
      out += json{{"hash", h}, {"score", s}}.dump();
      out.push_back('\n');
    }
    return out;
  }

 private:
  std::unordered_map<std::string, double> scores_;
};

/// Teacher port specs: file:<path> | dot:<encoder-spec> | const:<value>
inline std::unique_ptr<TeacherPort> make_teacher(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("teacher spec '" + spec + "' lacks a scheme");
  const std::string scheme = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (scheme == "file") return std::make_unique<FileTeacher>(FileTeacher::load(rest));
  if (scheme == "dot") return std::make_unique<DotTeacher>(make_encoder(rest));
  if (scheme == "const") {
    try {
      return std::make_unique<ConstantTeacher>(std::stod(rest));
    } catch (const std::logic_error&) {
      throw ValidationError("const teacher needs a numeric value");
    }
  }
  throw ValidationError("unknown teacher scheme '" + scheme + "'");
}

}  // namespace afrie5
