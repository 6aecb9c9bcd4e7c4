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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "afrie5/datamodel.hpp"
#include "afrie5/error.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

inline constexpr double kDefaultQeThreshold = 0.75;

struct ExpansionSettings {
  std::vector<LangCode> target_langs;
  std::vector<Direction> configs{std::begin(kAllDirections), std::end(kAllDirections)};
  double qe_threshold = kDefaultQeThreshold;

  void validate() const {
    if (configs.empty()) throw ValidationError("expansion configs must be non-empty");
    if (!(qe_threshold >= 0.0 && qe_threshold <= 1.0)) {
      throw ValidationError("qe_threshold must lie in [0,1]");
    }
  }

  bool enabled(Direction d) const { return std::find(configs.begin(), configs.end(), d) != configs.end(); }
};

struct BilingualPair {
  std::string example_id;
  Direction direction = Direction::kSrcSrc;
  LangCode lang;  // eng_Latn for SRC_SRC
  std::string premise_text;
  std::string hypothesis_text;
  Label label = Label::kEntailment;
  NliSource source = NliSource::kMnli;
  std::optional<double> min_translated_qe;  // absent iff SRC_SRC

  bool operator==(const BilingualPair&) const = default;
};

struct SideTranslations {
  std::optional<TranslationRecord> premise;
  std::optional<TranslationRecord> hypothesis;
};

using TranslationMap = std::map<LangCode, SideTranslations>;

// Translation and quality estimation sit behind these ports; the repo ships cache-backed stubs.
class TranslatorPort {
 public:
  virtual ~TranslatorPort() = default;
  virtual std::string translate(const std::string& text, const LangCode& src, const LangCode& tgt) = 0;
};

class QEPort {
 public:
  virtual ~QEPort() = default;
  /// Reference-free quality in [0,1].
  virtual double score(const std::string& source_text, const std::string& translated, const LangCode& lang) = 0;
};

namespace detail {

inline const TranslationRecord& require_side(const TranslationMap& translations, const NliExample& ex,
                                             const LangCode& lang, Side side) {
  auto it = translations.find(lang);
  const std::optional<TranslationRecord>* rec = nullptr;
  if (it != translations.end()) {
    rec = side == Side::kPremise ? &it->second.premise : &it->second.hypothesis;
  }
  if (rec == nullptr || !rec->has_value()) {
    throw ValidationError("missing translation for example '" + ex.id + "' lang " + lang.str() + " side " +
                          std::string(to_string(side)));
  }
  if (!(*rec)->qe_score) {
    throw ValidationError("translation for example '" + ex.id + "' lang " + lang.str() + " side " +
                          std::string(to_string(side)) + " has no qe_score");
  }
  return **rec;
}

}  // namespace detail

/// Expands one NLI example into bilingual pairs: per target language one pair for each enabled
/// translated direction, plus a single deduplicated source-source pair.
inline std::vector<BilingualPair> expand_example(const NliExample& ex, const TranslationMap& translations,
                                                 const ExpansionSettings& settings) {
  settings.validate();
  std::vector<BilingualPair> out;
  if (settings.enabled(Direction::kSrcSrc)) {
    out.push_back(BilingualPair{ex.id, Direction::kSrcSrc, source_lang(), ex.premise, ex.hypothesis, ex.label,
                                ex.source, std::nullopt});
  }
  for (const LangCode& lang : settings.target_langs) {
    for (Direction d : {Direction::kTgtSrc, Direction::kSrcTgt, Direction::kTgtTgt}) {
      if (!settings.enabled(d)) continue;
      BilingualPair pair{ex.id, d, lang, ex.premise, ex.hypothesis, ex.label, ex.source, std::nullopt};
      double qe = 1.0;
      if (premise_translated(d)) {
        const auto& rec = detail::require_side(translations, ex, lang, Side::kPremise);
        pair.premise_text = rec.text;
        qe = std::min(qe, *rec.qe_score);
      }
      if (hypothesis_translated(d)) {
        const auto& rec = detail::require_side(translations, ex, lang, Side::kHypothesis);
        pair.hypothesis_text = rec.text;
        qe = std::min(qe, *rec.qe_score);
      }
      pair.min_translated_qe = qe;
      out.push_back(std::move(pair));
    }
  }
  return out;
}

/// Keeps SRC_SRC pairs and pairs whose weakest translated side scores at least the threshold.
inline std::vector<BilingualPair> filter_by_qe(const std::vector<BilingualPair>& pairs, double threshold) {
  std::vector<BilingualPair> kept;
  for (const auto& p : pairs) {
    if (p.direction == Direction::kSrcSrc || (p.min_translated_qe && *p.min_translated_qe >= threshold)) {
      kept.push_back(p);
    }
  }
  return kept;
}

using PairGroup = std::vector<BilingualPair>;

/// Groups pairs that share one rendered premise in one (language, direction, source) slot.
/// Group order follows first appearance.
inline std::vector<PairGroup> group_pairs(const std::vector<BilingualPair>& pairs) {
  using Key = std::tuple<std::string, std::string, int, int>;
  std::map<Key, std::size_t> index;
  std::vector<PairGroup> groups;
  for (const auto& p : pairs) {
    Key key{p.premise_text, p.lang.str(), static_cast<int>(p.direction), static_cast<int>(p.source)};
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(p);
  }
  return groups;
}

/// Entailed hypotheses become positives, contradictions negatives; SNLI neutrals are extra
/// negatives. Groups without a positive are dropped.
inline std::vector<TrainInstance> build_contrastive(const std::vector<PairGroup>& groups) {
  std::vector<TrainInstance> out;
  for (const auto& group : groups) {
    if (group.empty()) continue;
    TrainInstance inst;
    inst.query = group.front().premise_text;
    inst.meta = InstanceMeta{group.front().lang, group.front().direction,
                             std::string(to_string(group.front().source))};
    std::set<std::string> seen_pos;
    std::set<std::string> seen_neg;
    for (const auto& p : group) {
      const std::string h = nfc(p.hypothesis_text);
      const bool negative = p.label == Label::kContradiction ||
                            (p.label == Label::kNeutral && p.source == NliSource::kSnli);
      if (p.label == Label::kEntailment) {
        if (seen_pos.insert(h).second) inst.pos.push_back(h);
      } else if (negative) {
        if (seen_neg.insert(h).second) inst.neg.push_back(h);
      }
    }
    if (inst.pos.empty()) continue;
    std::erase_if(inst.neg, [&](const std::string& n) { return seen_pos.count(n) > 0; });
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Translation cache: the file-backed stand-in for the MT and QE models.

class TranslationCache {
 public:
  TranslationCache() = default;
  explicit TranslationCache(std::vector<TranslationRecord> records) {
    for (auto& r : records) add(std::move(r));
  }

  void add(TranslationRecord r) {
    auto& slot = by_example_[r.example_id][r.lang];
    (r.side == Side::kPremise ? slot.premise : slot.hypothesis) = std::move(r);
  }

  /// Translations for one example; empty when the example has none.
  TranslationMap for_example(const std::string& example_id) const {
    auto it = by_example_.find(example_id);
    return it == by_example_.end() ? TranslationMap{} : it->second;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [id, langs] : by_example_) {
      for (const auto& [lang, sides] : langs) n += sides.premise.has_value() + sides.hypothesis.has_value();
    }
    return n;
  }

 private:
  std::unordered_map<std::string, TranslationMap> by_example_;
};

/// Translator and QE stub answering from cached (source text, language) lookups.
class CachedTranslationPort : public TranslatorPort, public QEPort {
 public:
  CachedTranslationPort(const std::vector<NliExample>& examples, const std::vector<TranslationRecord>& records) {
    std::unordered_map<std::string, const NliExample*> by_id;
    for (const auto& ex : examples) by_id[ex.id] = &ex;
    for (const auto& r : records) {
      auto it = by_id.find(r.example_id);
      if (it == by_id.end()) continue;
      const std::string& src = r.side == Side::kPremise ? it->second->premise : it->second->hypothesis;
      entries_[key(src, r.lang)] = Entry{r.text, r.qe_score};
    }
  }

  std::string translate(const std::string& text, const LangCode&, const LangCode& tgt) override {
    return lookup(text, tgt).text;
  }

  double score(const std::string& source_text, const std::string&, const LangCode& lang) override {
    const Entry& e = lookup(source_text, lang);
    if (!e.qe) throw RuntimeError("no cached qe_score for " + lang.str());
    return *e.qe;
  }

 private:
  struct Entry {
    std::string text;
    std::optional<double> qe;
  };

  static std::string key(const std::string& text, const LangCode& lang) { return content_hash(text) + ":" + lang.str(); }

  const Entry& lookup(const std::string& text, const LangCode& lang) const {
    auto it = entries_.find(key(text, lang));
    if (it == entries_.end()) throw RuntimeError("no cached translation into " + lang.str());
    return it->second;
  }

  std::unordered_map<std::string, Entry> entries_;
};

/// Produces translation records for every example side and target language through the ports.
inline std::vector<TranslationRecord> translate_corpus(const std::vector<NliExample>& examples,
                                                       const std::vector<LangCode>& langs, TranslatorPort& mt,
                                                       QEPort& qe) {
  std::vector<TranslationRecord> out;
  for (const auto& ex : examples) {
    for (const auto& lang : langs) {
      for (Side side : {Side::kPremise, Side::kHypothesis}) {
        const std::string& src = side == Side::kPremise ? ex.premise : ex.hypothesis;
        std::string tgt = mt.translate(src, source_lang(), lang);
        const double q = qe.score(src, tgt, lang);
        if (!(q >= 0.0 && q <= 1.0)) throw RuntimeError("QE port returned a score outside [0,1]");
        out.push_back(TranslationRecord{ex.id, side, lang, std::move(tgt), q});
      }
    }
  }
  return out;
}

struct BuildStats {
  std::size_t examples = 0;
  std::size_t expanded_pairs = 0;
  std::size_t retained_pairs = 0;
  std::size_t instances = 0;
  std::map<std::string, std::size_t> retained_by_lang;
};

/// Full data construction: expand, filter, group, build.
inline std::vector<TrainInstance> build_dataset(const std::vector<NliExample>& examples,
                                                const TranslationCache& cache, const ExpansionSettings& settings,
                                                BuildStats* stats = nullptr) {
  settings.validate();
  std::vector<BilingualPair> pairs;
  for (const auto& ex : examples) {
    auto expanded = expand_example(ex, cache.for_example(ex.id), settings);
    pairs.insert(pairs.end(), std::make_move_iterator(expanded.begin()), std::make_move_iterator(expanded.end()));
  }
  auto kept = filter_by_qe(pairs, settings.qe_threshold);
  auto instances = build_contrastive(group_pairs(kept));
  if (stats) {
    stats->examples = examples.size();
    stats->expanded_pairs = pairs.size();
    stats->retained_pairs = kept.size();
    stats->instances = instances.size();
    for (const auto& p : kept) ++stats->retained_by_lang[p.lang.str()];
  }
  return instances;
}

}  // namespace afrie5
