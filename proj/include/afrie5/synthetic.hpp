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
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "afrie5/datamodel.hpp"
#include "afrie5/datasets.hpp"
#include "afrie5/error.hpp"
#include "afrie5/metrics.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

// Toy languages: every language is a deterministic word-for-word relabelling of a small English
// vocabulary grouped into topics. amh_Ethi renders in Ethiopic syllables, others in Latin CV
// syllables drawn from a per-language inventory.

inline const std::vector<std::vector<std::string>>& topic_vocabulary() {
  static const std::vector<std::vector<std::string>> v = {
      {"rain", "cloud", "wind", "storm", "sun", "cold", "heat", "season", "flood", "dry", "sky", "thunder"},
      {"market", "price", "money", "trade", "bank", "sell", "buy", "shop", "goods", "profit", "loan", "tax"},
      {"farm", "maize", "cattle", "harvest", "seed", "soil", "goat", "plough", "field", "crop", "barn", "yam"},
      {"football", "goal", "team", "match", "coach", "league", "player", "stadium", "score", "ball", "fans", "win"},
      {"doctor", "clinic", "fever", "medicine", "nurse", "malaria", "vaccine", "patient", "health", "pain",
       "hospital", "cure"},
      {"school", "teacher", "pupil", "lesson", "exam", "book", "class", "study", "read", "write", "chalk", "grade"},
      {"music", "drum", "song", "dance", "singer", "guitar", "rhythm", "choir", "melody", "concert", "band", "radio"},
      {"travel", "road", "bus", "train", "journey", "ticket", "border", "airport", "driver", "map", "bridge",
       "station"},
  };
  return v;
}

inline int topic_count() { return static_cast<int>(topic_vocabulary().size()); }

class ToyWorld {
 public:
  /// Word-for-word rendering of English words into lang (identity for English).
  std::string render(const std::vector<std::string>& words, const LangCode& lang) const {
    std::string out;
    const bool english = lang == source_lang();
    const auto* lex = english ? nullptr : &lexicon(lang);
    for (const auto& w : words) {
      if (!out.empty()) out.push_back(' ');
      if (english) {
        out += w;
      } else {
        auto it = lex->find(w);
        if (it == lex->end()) throw ValidationError("word outside the toy vocabulary: " + w);
        out += it->second;
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& lexicon(const LangCode& lang) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = lexicons_.find(lang.str());
    if (it != lexicons_.end()) return it->second;
    return lexicons_.emplace(lang.str(), build_lexicon(lang)).first->second;
  }

 private:
  static std::string append_cp(std::string s, char32_t cp) {
    if (cp < 0x800) {
      s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return s;
  }

  static std::map<std::string, std::string> build_lexicon(const LangCode& lang) {
    const bool ethiopic = lang.str().size() >= 4 && lang.str().substr(lang.str().size() - 4) == "Ethi";
    std::mt19937_64 inv_rng(fnv1a(lang.str()));
    std::string consonants = "bcdfghjklmnpqrstvwxyz";
    std::shuffle(consonants.begin(), consonants.end(), inv_rng);
    consonants.resize(12);
    const std::string vowels = "aeiou";
    std::map<std::string, std::string> lex;
    std::set<std::string> used;
    for (const auto& topic : topic_vocabulary()) {
      for (const auto& w : topic) {
        for (std::uint64_t salt = 0;; ++salt) {
          std::mt19937_64 rng(fnv1a(w, fnv1a(lang.str())) + salt);
          const int syllables = 2 + static_cast<int>(rng() % 2);
          std::string word;
          for (int s = 0; s < syllables; ++s) {
            if (ethiopic) {
              word = append_cp(std::move(word), static_cast<char32_t>(0x1200 + 8 * (rng() % 40) + rng() % 7));
            } else {
              word.push_back(consonants[rng() % consonants.size()]);
              word.push_back(vowels[rng() % vowels.size()]);
            }
          }
          if (used.insert(word).second) {
            lex[w] = word;
            break;
          }
        }
      }
    }
    return lex;
  }

  mutable std::mutex mu_;
  mutable std::map<std::string, std::map<std::string, std::string>> lexicons_;
};

/// n distinct words of one topic in random order.
inline std::vector<std::string> topic_words(std::mt19937_64& rng, int topic, int n) {
  std::vector<std::string> words = topic_vocabulary().at(static_cast<std::size_t>(topic));
  if (n > static_cast<int>(words.size())) throw ValidationError("topic_words: n exceeds vocabulary");
  std::shuffle(words.begin(), words.end(), rng);
  words.resize(static_cast<std::size_t>(n));
  return words;
}

inline int other_topic(std::mt19937_64& rng, int topic) {
  return (topic + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(topic_count() - 1))) % topic_count();
}

// ---------------------------------------------------------------------------
// Synthetic NLI corpus

/// Three hypotheses per premise (entailment = ordered subset of the premise words,
/// contradiction = another topic, neutral = half and half). Premises are distinct.
inline std::vector<NliExample> synthetic_nli(int premises, std::uint64_t seed, NliSource source = NliSource::kMnli) {
  std::mt19937_64 rng(seed);
  std::vector<NliExample> out;
  std::set<std::vector<std::string>> seen;
  for (int i = 0; i < premises; ++i) {
    const int topic = i % topic_count();
    std::vector<std::string> premise;
    do premise = topic_words(rng, topic, 6);
    while (!seen.insert(premise).second);
    auto join = [](const std::vector<std::string>& w) {
      std::string s;
      for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
      return s;
    };
    std::vector<std::string> ent;
    std::vector<int> idx = {0, 1, 2, 3, 4, 5};
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(3);
    std::sort(idx.begin(), idx.end());
    for (int k : idx) ent.push_back(premise[static_cast<std::size_t>(k)]);
    const auto con = topic_words(rng, other_topic(rng, topic), 4);
    std::vector<std::string> neu = {premise[0], premise[5]};
    for (auto& w : topic_words(rng, other_topic(rng, topic), 2)) neu.push_back(w);
    const std::string id = "syn" + std::to_string(i);
    const std::string p = join(premise);
    out.push_back({id + "-e", p, join(ent), Label::kEntailment, source});
    out.push_back({id + "-n", p, join(neu), Label::kNeutral, source});
    out.push_back({id + "-c", p, join(con), Label::kContradiction, source});
  }
  return out;
}

/// Toy-language translations of both sides with qe scores uniform on [qe_lo, qe_hi].
inline std::vector<TranslationRecord> synthetic_translations(const ToyWorld& world,
                                                             const std::vector<NliExample>& examples,
                                                             const std::vector<LangCode>& langs, std::uint64_t seed,
                                                             double qe_lo = 0.0, double qe_hi = 1.0) {
  if (!(qe_lo >= 0.0 && qe_hi <= 1.0 && qe_lo <= qe_hi)) throw ValidationError("qe range must lie within [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> qe(qe_lo, qe_hi);
  std::vector<TranslationRecord> out;
  for (const auto& ex : examples) {
    for (const auto& lang : langs) {
      for (Side side : {Side::kPremise, Side::kHypothesis}) {
        const std::string& src = side == Side::kPremise ? ex.premise : ex.hypothesis;
        out.push_back({ex.id, side, lang, world.render(split(src, ' '), lang), qe(rng)});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-family fixtures with oracle embeddings built from the gold labels

inline constexpr int kOracleDim = 128;

struct SyntheticCell {
  LabeledDataset dataset;
  std::vector<std::pair<std::string, std::vector<double>>> oracle;  // text -> embedding
};

namespace detail {

class CellBuilder {
 public:
  CellBuilder(const ToyWorld& world, LangCode lang, std::uint64_t seed, std::set<std::string>* taken)
      : world_(world), lang_(std::move(lang)), rng_(seed), texts_(taken ? taken : &own_) {}

  std::mt19937_64& rng() { return rng_; }

  /// Renders a fresh word list, regenerating until the text is new within the cell.
  template <typename Gen>
  std::string fresh(Gen&& gen, const LangCode* lang = nullptr) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::string text = world_.render(gen(), lang ? *lang : lang_);
      if (texts_->insert(text).second) return text;
    }
    throw RuntimeError("synthetic generator could not find a fresh text");
  }

  /// Registers an externally rendered text; false when it is already taken.
  bool claim(const std::string& text) { return texts_->insert(text).second; }

  void embed(const std::string& text, const std::vector<double>& v) { oracle_.emplace_back(text, v); }
  void embed_axis(const std::string& text, int axis) { embed(text, unit(axis)); }

  static std::vector<double> unit(int axis) {
    if (axis < 0 || axis >= kOracleDim) throw RuntimeError("oracle axis out of range");
    std::vector<double> v(kOracleDim, 0.0);
    v[static_cast<std::size_t>(axis)] = 1.0;
    return v;
  }

  std::vector<std::pair<std::string, std::vector<double>>> take_oracle() { return std::move(oracle_); }

 private:
  const ToyWorld& world_;
  LangCode lang_;
  std::mt19937_64 rng_;
  std::set<std::string> own_;
  std::set<std::string>* texts_;
  std::vector<std::pair<std::string, std::vector<double>>> oracle_;
};

inline std::string topic_label(int t) { return "topic" + std::to_string(t); }

}  // namespace detail

/// One (family, language) fixture. Texts are in lang except bitext sources, which are English.
/// Texts already in taken are avoided and new ones are added, so cells generated against one
/// set never share a text.
inline SyntheticCell synthetic_cell(const ToyWorld& world, Family family, const LangCode& lang, std::uint64_t seed,
                                    std::set<std::string>* taken = nullptr) {
  detail::CellBuilder b(world, lang, seed, taken);
  auto& rng = b.rng();
  const int T = topic_count();
  SyntheticCell cell{LabeledDataset{family, BitextData{}}, {}};
  switch (family) {
    case Family::kBtxt: {
      BitextData d;
      for (int i = 0; i < 40; ++i) {
        std::vector<std::string> words;
        std::string src, tgt;
        do {
          src = b.fresh([&] { return words = topic_words(rng, i % T, 7); }, &source_lang());
          tgt = world.render(words, lang);
        } while (!b.claim(tgt));
        d.src.push_back(src);
        d.tgt.push_back(tgt);
        b.embed_axis(src, i);
        b.embed_axis(tgt, i);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kClf: {
      ClassificationData d;
      for (int i = 0; i < 12 * T; ++i) {
        const int t = i % T;
        const std::string text = b.fresh([&] { return topic_words(rng, t, 6); });
        const bool train = i < 8 * T;
        (train ? d.train_texts : d.test_texts).push_back(text);
        (train ? d.train_labels : d.test_labels).push_back(detail::topic_label(t));
        b.embed_axis(text, t);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kMultiClf: {
      MultiLabelData d;
      const int labels = 5;
      for (int i = 0; i < 90; ++i) {
        std::set<int> set = {i % labels};
        if (i % 3 == 0) set.insert((i / 3 + 1 + i % labels) % labels);
        const std::string text = b.fresh([&] {
          std::vector<std::string> words;
          for (int t : set)
            for (auto& w : topic_words(rng, t, 3)) words.push_back(w);
          return words;
        });
        std::vector<double> v(kOracleDim, 0.0);
        std::vector<std::string> names;
        for (int t : set) {
          v[static_cast<std::size_t>(t)] = 1.0;
          names.push_back(detail::topic_label(t));
        }
        const bool train = i < 60;
        (train ? d.train_texts : d.test_texts).push_back(text);
        (train ? d.train_labels : d.test_labels).push_back(names);
        b.embed(text, v);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kPrClf: {
      PairData d;
      for (int i = 0; i < 40; ++i) {
        const int t = i % T;
        std::vector<std::string> premise;
        const std::string text1 = b.fresh([&] { return premise = topic_words(rng, t, 6); });
        const bool positive = i % 2 == 0;
        const std::string text2 = b.fresh([&] {
          if (!positive) return topic_words(rng, other_topic(rng, t), 4);
          std::vector<std::string> sub = premise;
          std::shuffle(sub.begin(), sub.end(), rng);
          sub.resize(3);
          return sub;
        });
        d.text1.push_back(text1);
        d.text2.push_back(text2);
        d.labels.push_back(positive ? 1 : 0);
        b.embed_axis(text1, 2 * i);
        b.embed_axis(text2, positive ? 2 * i : 2 * i + 1);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kClust: {
      ClusteringData d;
      for (int i = 0; i < 6 * T; ++i) {
        const int t = i % T;
        const std::string text = b.fresh([&] { return topic_words(rng, t, 6); });
        d.texts.push_back(text);
        d.clusters.push_back(detail::topic_label(t));
        b.embed_axis(text, t);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kSts: {
      StsData d;
      for (int i = 0; i < 35; ++i) {
        const int t = i % T;
        const int shared = i % 7;
        std::vector<std::string> first;
        const std::string text1 = b.fresh([&] { return first = topic_words(rng, t, 6); });
        const std::string text2 = b.fresh([&] {
          std::vector<std::string> words(first.begin(), first.begin() + shared);
          for (auto& w : topic_words(rng, other_topic(rng, t), 6 - shared)) words.push_back(w);
          std::shuffle(words.begin(), words.end(), rng);
          return words;
        });
        const double s = shared / 6.0;
        d.text1.push_back(text1);
        d.text2.push_back(text2);
        d.scores.push_back(5.0 * s);
        b.embed_axis(text1, 2 * i);
        std::vector<double> v(kOracleDim, 0.0);
        v[static_cast<std::size_t>(2 * i)] = s;
        v[static_cast<std::size_t>(2 * i + 1)] = std::sqrt(1.0 - s * s);
        b.embed(text2, v);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kRtrvl: {
      RetrievalData d;
      const int queries = 20;
      std::vector<std::vector<std::string>> doc_words;
      for (int j = 0; j < 3 * queries; ++j) {
        std::vector<std::string> words;
        const std::string doc = b.fresh([&] { return words = topic_words(rng, j % T, 8); });
        doc_words.push_back(words);
        d.corpus.push_back(doc);
        b.embed_axis(doc, j % 3 == 0 ? j / 3 : queries + j);
      }
      for (int i = 0; i < queries; ++i) {
        const std::string q = b.fresh([&] {
          std::vector<std::string> w = doc_words[static_cast<std::size_t>(3 * i)];
          std::shuffle(w.begin(), w.end(), rng);
          w.resize(3);
          return w;
        });
        d.queries.push_back(q);
        d.qrels.push_back({3 * i});
        b.embed_axis(q, i);
      }
      cell.dataset.body = std::move(d);
      break;
    }
    case Family::kRrnk: {
      RerankData d;
      const int queries = 15;
      int next_axis = queries;
      for (int i = 0; i < queries; ++i) {
        const int t = i % T;
        const std::string q = b.fresh([&] { return topic_words(rng, t, 3); });
        b.embed_axis(q, i);
        std::vector<std::string> cands;
        std::vector<int> labels;
        for (int k = 0; k < 8; ++k) {
          const bool pos = k < 2;
          const std::string c = b.fresh([&] { return topic_words(rng, pos ? t : other_topic(rng, t), 7); });
          b.embed_axis(c, pos ? i : next_axis++);
          cands.push_back(c);
          labels.push_back(pos ? 1 : 0);
        }
        d.queries.push_back(q);
        d.candidates.push_back(std::move(cands));
        d.labels.push_back(std::move(labels));
      }
      cell.dataset.body = std::move(d);
      break;
    }
  }
  cell.oracle = b.take_oracle();
  return cell;
}

}  // namespace afrie5
