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

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "afrie5/error.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

using json = nlohmann::json;

// ISO 639-3 code plus script, e.g. amh_Ethi.
class LangCode {
 public:
  LangCode() = default;
  explicit LangCode(std::string code) : code_(std::move(code)) {
    if (!is_valid(code_)) {
      throw ValidationError("invalid language code '" + code_ + "'");
    }
  }

  static bool is_valid(std::string_view s) {
    if (s.size() != 8 || s[3] != '_') return false;
    for (int i = 0; i < 3; ++i) {
      if (s[i] < 'a' || s[i] > 'z') return false;
    }
    if (s[4] < 'A' || s[4] > 'Z') return false;
    for (int i = 5; i < 8; ++i) {
      if (s[i] < 'a' || s[i] > 'z') return false;
    }
    return true;
  }

  const std::string& str() const { return code_; }
  auto operator<=>(const LangCode&) const = default;

 private:
  std::string code_;
};

inline const LangCode& source_lang() {
  static const LangCode eng("eng_Latn");
  return eng;
}

enum class Label { kEntailment, kNeutral, kContradiction };
enum class NliSource { kMnli, kSnli };
enum class Side { kPremise, kHypothesis };

// Which side is rendered in the target language: TGT_SRC puts the premise in the
// target and keeps the hypothesis in the source language.
enum class Direction { kTgtSrc, kSrcTgt, kTgtTgt, kSrcSrc };

inline constexpr Direction kAllDirections[] = {Direction::kTgtSrc, Direction::kSrcTgt,
                                               Direction::kTgtTgt, Direction::kSrcSrc};

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::kEntailment: return "entailment";
    case Label::kNeutral: return "neutral";
    case Label::kContradiction: return "contradiction";
  }
  return "";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "entailment") return Label::kEntailment;
  if (s == "neutral") return Label::kNeutral;
  if (s == "contradiction") return Label::kContradiction;
  return std::nullopt;
}

inline std::string_view to_string(NliSource s) { return s == NliSource::kMnli ? "mnli" : "snli"; }

inline std::optional<NliSource> parse_source(std::string_view s) {
  if (s == "mnli") return NliSource::kMnli;
  if (s == "snli") return NliSource::kSnli;
  return std::nullopt;
}

inline std::string_view to_string(Side s) { return s == Side::kPremise ? "premise" : "hypothesis"; }

inline std::optional<Side> parse_side(std::string_view s) {
  if (s == "premise") return Side::kPremise;
  if (s == "hypothesis") return Side::kHypothesis;
  return std::nullopt;
}

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kTgtSrc: return "TGT_SRC";
    case Direction::kSrcTgt: return "SRC_TGT";
    case Direction::kTgtTgt: return "TGT_TGT";
    case Direction::kSrcSrc: return "SRC_SRC";
  }
  return "";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  for (Direction d : kAllDirections) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

inline bool premise_translated(Direction d) { return d == Direction::kTgtSrc || d == Direction::kTgtTgt; }
inline bool hypothesis_translated(Direction d) { return d == Direction::kSrcTgt || d == Direction::kTgtTgt; }

struct NliExample {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label label = Label::kEntailment;
  NliSource source = NliSource::kMnli;

  bool operator==(const NliExample&) const = default;
};

struct TranslationRecord {
  std::string example_id;
  Side side = Side::kPremise;
  LangCode lang;
  std::string text;
  std::optional<double> qe_score;  // absent is not 0.0: source sides are never scored

  bool operator==(const TranslationRecord&) const = default;
};

struct InstanceMeta {
  LangCode lang;
  Direction direction = Direction::kSrcSrc;
  std::string source;  // dataset key used for same-dataset batching

  bool operator==(const InstanceMeta&) const = default;
};

struct TrainInstance {
  std::string query;
  std::vector<std::string> pos;
  std::vector<std::string> neg;
  std::optional<std::vector<double>> teacher_scores;  // aligned to [pos[0]] ++ neg
  InstanceMeta meta;

  bool operator==(const TrainInstance&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

/// Returns the name of the first violated TrainInstance invariant, or nullopt when valid.
inline std::optional<std::string> validate_train_instance(
    const TrainInstance& inst, std::optional<std::size_t> max_negatives = std::nullopt) {
  if (inst.pos.empty()) return "empty pos";
  if (max_negatives && inst.neg.size() > *max_negatives) return "too many negatives";
  if (inst.teacher_scores) {
    if (inst.teacher_scores->size() != 1 + inst.neg.size()) return "score length";
    for (double s : *inst.teacher_scores) {
      if (!std::isfinite(s)) return "non-finite teacher score";
    }
  }
  std::unordered_set<std::string> positives;
  for (const auto& p : inst.pos) positives.insert(nfc(p));
  for (const auto& n : inst.neg) {
    if (positives.count(nfc(n))) return "pos/neg overlap";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON schemas

namespace detail {

inline const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw ValidationError("missing field '" + std::string(name) + "' at line " + std::to_string(line));
  }
  return *it;
}

inline std::string string_field(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_string()) {
    throw ValidationError("field '" + std::string(name) + "' must be a string at line " +
                          std::to_string(line));
  }
  return v.get<std::string>();
}

inline std::vector<std::string> string_list_field(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_array()) {
    throw ValidationError("field '" + std::string(name) + "' must be a list at line " +
                          std::to_string(line));
  }
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) {
      throw ValidationError("field '" + std::string(name) + "' must hold strings at line " +
                            std::to_string(line));
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline json parse_json_line(const std::string& line, std::size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ValidationError("record is not an object at line " + std::to_string(line_no));
    return j;
  } catch (const json::parse_error&) {
    throw ValidationError("malformed JSON at line " + std::to_string(line_no));
  }
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

inline json to_json(const NliExample& ex) {
  return json{{"id", ex.id},
              {"premise", ex.premise},
              {"hypothesis", ex.hypothesis},
              {"label", to_string(ex.label)},
              {"source", to_string(ex.source)}};
}

inline NliExample nli_from_json(const json& j, std::size_t line) {
  NliExample ex;
  ex.id = detail::string_field(j, "id", line);
  ex.premise = nfc(detail::string_field(j, "premise", line));
  ex.hypothesis = nfc(detail::string_field(j, "hypothesis", line));
  if (ex.premise.empty()) throw ValidationError("empty premise at line " + std::to_string(line));
  if (ex.hypothesis.empty()) throw ValidationError("empty hypothesis at line " + std::to_string(line));
  auto label = parse_label(detail::string_field(j, "label", line));
  if (!label) throw ValidationError("unknown label at line " + std::to_string(line));
  ex.label = *label;
  auto source = parse_source(detail::string_field(j, "source", line));
  if (!source) throw ValidationError("unknown source at line " + std::to_string(line));
  ex.source = *source;
  return ex;
}

/// Parses newline-delimited NLI records. Blank lines are skipped; line numbers are 1-based.
inline std::vector<NliExample> parse_nli_lines(std::string_view data) {
  std::vector<NliExample> out;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    out.push_back(nli_from_json(detail::parse_json_line(lines[i], i + 1), i + 1));
  }
  return out;
}

inline json to_json(const TranslationRecord& r) {
  json j{{"example_id", r.example_id},
         {"side", to_string(r.side)},
         {"lang", r.lang.str()},
         {"text", r.text}};
  if (r.qe_score) j["qe_score"] = *r.qe_score;
  return j;
}

inline TranslationRecord translation_from_json(const json& j, std::size_t line) {
  TranslationRecord r;
  r.example_id = detail::string_field(j, "example_id", line);
  auto side = parse_side(detail::string_field(j, "side", line));
  if (!side) throw ValidationError("unknown side at line " + std::to_string(line));
  r.side = *side;
  const std::string lang = detail::string_field(j, "lang", line);
  if (!LangCode::is_valid(lang)) throw ValidationError("invalid lang at line " + std::to_string(line));
  r.lang = LangCode(lang);
  r.text = nfc(detail::string_field(j, "text", line));
  if (auto it = j.find("qe_score"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ValidationError("qe_score must be a number at line " + std::to_string(line));
    const double q = it->get<double>();
    if (!(q >= 0.0 && q <= 1.0)) {
      throw ValidationError("qe_score outside [0,1] at line " + std::to_string(line));
    }
    r.qe_score = q;
  }
  return r;
}

inline std::vector<TranslationRecord> parse_translation_lines(std::string_view data) {
  std::vector<TranslationRecord> out;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    out.push_back(translation_from_json(detail::parse_json_line(lines[i], i + 1), i + 1));
  }
  return out;
}

inline json to_json(const TrainInstance& inst) {
  json j{{"query", inst.query},
         {"pos", inst.pos},
         {"neg", inst.neg},
         {"meta",
          {{"lang", inst.meta.lang.str()},
           {"direction", to_string(inst.meta.direction)},
           {"source", inst.meta.source}}}};
  if (inst.teacher_scores) j["teacher_scores"] = *inst.teacher_scores;
  return j;
}

inline TrainInstance train_instance_from_json(const json& j, std::size_t line) {
  TrainInstance inst;
  inst.query = nfc(detail::string_field(j, "query", line));
  for (auto& p : detail::string_list_field(j, "pos", line)) inst.pos.push_back(nfc(p));
  for (auto& n : detail::string_list_field(j, "neg", line)) inst.neg.push_back(nfc(n));
  if (auto it = j.find("teacher_scores"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("teacher_scores must be a list at line " + std::to_string(line));
    std::vector<double> scores;
    for (const auto& s : *it) {
      if (!s.is_number()) throw ValidationError("teacher_scores must hold numbers at line " + std::to_string(line));
      scores.push_back(s.get<double>());
    }
    inst.teacher_scores = std::move(scores);
  }
  const json& meta = detail::field(j, "meta", line);
  const std::string lang = detail::string_field(meta, "lang", line);
  if (!LangCode::is_valid(lang)) throw ValidationError("invalid meta.lang at line " + std::to_string(line));
  inst.meta.lang = LangCode(lang);
  auto dir = parse_direction(detail::string_field(meta, "direction", line));
  if (!dir) throw ValidationError("unknown meta.direction at line " + std::to_string(line));
  inst.meta.direction = *dir;
  inst.meta.source = detail::string_field(meta, "source", line);
  if (auto err = validate_train_instance(inst)) {
    throw ValidationError(*err + " at line " + std::to_string(line));
  }
  return inst;
}

inline std::vector<TrainInstance> parse_train_lines(std::string_view data) {
  std::vector<TrainInstance> out;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    out.push_back(train_instance_from_json(detail::parse_json_line(lines[i], i + 1), i + 1));
  }
  return out;
}

/// One compact JSON object per line with sorted keys; this is the canonical form.
template <typename Range>
std::string to_jsonl(const Range& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace afrie5
