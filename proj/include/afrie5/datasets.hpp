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

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "afrie5/datamodel.hpp"
#include "afrie5/encoder.hpp"
#include "afrie5/error.hpp"
#include "afrie5/metrics.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

// Per-family dataset shapes. Files are JSONL, one per (task, language):
//   Btxt      {"src": str, "tgt": str}                       gold = line alignment
//   Clf       {"text": str, "label": str, "split": "train"|"test"}
//   MultiClf  {"text": str, "labels": [str], "split": "train"|"test"}
//   PrClf     {"text1": str, "text2": str, "label": 0|1}
//   Clust     {"text": str, "cluster": str}
//   STS       {"text1": str, "text2": str, "score": float}
//   Rtrvl     {"kind": "doc", "id": str, "text": str} | {"kind": "query", "id": str, "text": str, "relevant": [str]}
//   Rrnk      {"query": str, "positive": [str], "negative": [str]}

struct BitextData {
  std::vector<std::string> src, tgt;
};
struct ClassificationData {
  std::vector<std::string> train_texts, test_texts;
  std::vector<std::string> train_labels, test_labels;
};
struct MultiLabelData {
  std::vector<std::string> train_texts, test_texts;
  std::vector<std::vector<std::string>> train_labels, test_labels;
};
struct PairData {
  std::vector<std::string> text1, text2;
  std::vector<int> labels;
};
struct ClusteringData {
  std::vector<std::string> texts;
  std::vector<std::string> clusters;
};
struct StsData {
  std::vector<std::string> text1, text2;
  std::vector<double> scores;
};
struct RetrievalData {
  std::vector<std::string> queries, corpus;
  std::vector<std::vector<int>> qrels;  // corpus indices per query
};
struct RerankData {
  std::vector<std::string> queries;
  std::vector<std::vector<std::string>> candidates;
  std::vector<std::vector<int>> labels;
};

using DatasetBody = std::variant<BitextData, PairData, ClassificationData, MultiLabelData, ClusteringData, StsData,
                                 RetrievalData, RerankData>;

struct LabeledDataset {
  Family family = Family::kBtxt;
  DatasetBody body;
};

inline bool body_matches(Family f, const DatasetBody& body) {
  switch (f) {
    case Family::kBtxt: return std::holds_alternative<BitextData>(body);
    case Family::kPrClf: return std::holds_alternative<PairData>(body);
    case Family::kClf: return std::holds_alternative<ClassificationData>(body);
    case Family::kMultiClf: return std::holds_alternative<MultiLabelData>(body);
    case Family::kClust: return std::holds_alternative<ClusteringData>(body);
    case Family::kSts: return std::holds_alternative<StsData>(body);
    case Family::kRtrvl: return std::holds_alternative<RetrievalData>(body);
    case Family::kRrnk: return std::holds_alternative<RerankData>(body);
  }
  return false;
}

namespace detail {

inline bool is_train(const json& j, std::size_t line) {
  const std::string split = string_field(j, "split", line);
  if (split == "train") return true;
  if (split == "test") return false;
  throw ValidationError("split must be train or test at line " + std::to_string(line));
}

template <typename Fn>
void for_each_record(std::string_view data, Fn&& fn) {
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    fn(parse_json_line(lines[i], i + 1), i + 1);
  }
}

}  // namespace detail

inline LabeledDataset parse_dataset(Family family, std::string_view data) {
  LabeledDataset ds{family, BitextData{}};
  switch (family) {
    case Family::kBtxt: {
      BitextData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        d.src.push_back(detail::string_field(j, "src", l));
        d.tgt.push_back(detail::string_field(j, "tgt", l));
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kClf: {
      ClassificationData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        const bool train = detail::is_train(j, l);
        (train ? d.train_texts : d.test_texts).push_back(detail::string_field(j, "text", l));
        (train ? d.train_labels : d.test_labels).push_back(detail::string_field(j, "label", l));
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kMultiClf: {
      MultiLabelData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        const bool train = detail::is_train(j, l);
        (train ? d.train_texts : d.test_texts).push_back(detail::string_field(j, "text", l));
        (train ? d.train_labels : d.test_labels).push_back(detail::string_list_field(j, "labels", l));
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kPrClf: {
      PairData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        d.text1.push_back(detail::string_field(j, "text1", l));
        d.text2.push_back(detail::string_field(j, "text2", l));
        const json& lab = detail::field(j, "label", l);
        if (!lab.is_number_integer() || (lab.get<int>() != 0 && lab.get<int>() != 1)) {
          throw ValidationError("label must be 0 or 1 at line " + std::to_string(l));
        }
        d.labels.push_back(lab.get<int>());
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kClust: {
      ClusteringData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        d.texts.push_back(detail::string_field(j, "text", l));
        d.clusters.push_back(detail::string_field(j, "cluster", l));
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kSts: {
      StsData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        d.text1.push_back(detail::string_field(j, "text1", l));
        d.text2.push_back(detail::string_field(j, "text2", l));
        const json& s = detail::field(j, "score", l);
        if (!s.is_number()) throw ValidationError("score must be a number at line " + std::to_string(l));
        d.scores.push_back(s.get<double>());
      });
      ds.body = std::move(d);
      break;
    }
    case Family::kRtrvl: {
      RetrievalData d;
      std::map<std::string, int> doc_index;
      std::vector<std::vector<std::string>> pending;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        const std::string kind = detail::string_field(j, "kind", l);
        if (kind == "doc") {
          const std::string id = detail::string_field(j, "id", l);
          if (!doc_index.emplace(id, static_cast<int>(d.corpus.size())).second) {
            throw ValidationError("duplicate doc id '" + id + "' at line " + std::to_string(l));
          }
          d.corpus.push_back(detail::string_field(j, "text", l));
        } else if (kind == "query") {
          d.queries.push_back(detail::string_field(j, "text", l));
          pending.push_back(detail::string_list_field(j, "relevant", l));
        } else {
          throw ValidationError("kind must be doc or query at line " + std::to_string(l));
        }
      });
      for (const auto& rel : pending) {
        std::vector<int> ids;
        for (const auto& r : rel) {
          auto it = doc_index.find(r);
          if (it == doc_index.end()) throw ValidationError("qrel refers to unknown doc '" + r + "'");
          ids.push_back(it->second);
        }
        d.qrels.push_back(std::move(ids));
      }
      ds.body = std::move(d);
      break;
    }
    case Family::kRrnk: {
      RerankData d;
      detail::for_each_record(data, [&](const json& j, std::size_t l) {
        d.queries.push_back(detail::string_field(j, "query", l));
        std::vector<std::string> cands = detail::string_list_field(j, "positive", l);
        std::vector<int> labels(cands.size(), 1);
        for (auto& n : detail::string_list_field(j, "negative", l)) {
          cands.push_back(std::move(n));
          labels.push_back(0);
        }
        d.candidates.push_back(std::move(cands));
        d.labels.push_back(std::move(labels));
      });
      ds.body = std::move(d);
      break;
    }
  }
  return ds;
}

inline std::string dataset_to_jsonl(const LabeledDataset& ds) {
  std::string out;
  auto emit = [&](const json& j) {
    out += j.dump();
    out.push_back('\n');
  };
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BitextData>) {
          for (std::size_t i = 0; i < d.src.size(); ++i) emit({{"src", d.src[i]}, {"tgt", d.tgt[i]}});
        } else if constexpr (std::is_same_v<T, ClassificationData>) {
          for (std::size_t i = 0; i < d.train_texts.size(); ++i)
            emit({{"text", d.train_texts[i]}, {"label", d.train_labels[i]}, {"split", "train"}});
          for (std::size_t i = 0; i < d.test_texts.size(); ++i)
            emit({{"text", d.test_texts[i]}, {"label", d.test_labels[i]}, {"split", "test"}});
        } else if constexpr (std::is_same_v<T, MultiLabelData>) {
          for (std::size_t i = 0; i < d.train_texts.size(); ++i)
            emit({{"text", d.train_texts[i]}, {"labels", d.train_labels[i]}, {"split", "train"}});
          for (std::size_t i = 0; i < d.test_texts.size(); ++i)
            emit({{"text", d.test_texts[i]}, {"labels", d.test_labels[i]}, {"split", "test"}});
        } else if constexpr (std::is_same_v<T, PairData>) {
          for (std::size_t i = 0; i < d.text1.size(); ++i)
            emit({{"text1", d.text1[i]}, {"text2", d.text2[i]}, {"label", d.labels[i]}});
        } else if constexpr (std::is_same_v<T, ClusteringData>) {
          for (std::size_t i = 0; i < d.texts.size(); ++i) emit({{"text", d.texts[i]}, {"cluster", d.clusters[i]}});
        } else if constexpr (std::is_same_v<T, StsData>) {
          for (std::size_t i = 0; i < d.text1.size(); ++i)
            emit({{"text1", d.text1[i]}, {"text2", d.text2[i]}, {"score", d.scores[i]}});
        } else if constexpr (std::is_same_v<T, RetrievalData>) {
          for (std::size_t i = 0; i < d.corpus.size(); ++i)
            emit({{"kind", "doc"}, {"id", "d" + std::to_string(i)}, {"text", d.corpus[i]}});
          for (std::size_t i = 0; i < d.queries.size(); ++i) {
            std::vector<std::string> rel;
            for (int r : d.qrels[i]) rel.push_back("d" + std::to_string(r));
            emit({{"kind", "query"}, {"id", "q" + std::to_string(i)}, {"text", d.queries[i]}, {"relevant", rel}});
          }
        } else if constexpr (std::is_same_v<T, RerankData>) {
          for (std::size_t i = 0; i < d.queries.size(); ++i) {
            std::vector<std::string> pos, neg;
            for (std::size_t k = 0; k < d.candidates[i].size(); ++k)
              (d.labels[i][k] ? pos : neg).push_back(d.candidates[i][k]);
            emit({{"query", d.queries[i]}, {"positive", pos}, {"negative", neg}});
          }
        }
      },
      ds.body);
  return out;
}

namespace detail {

inline std::vector<int> intern(const std::vector<std::string>& labels, std::map<std::string, int>& ids) {
  std::vector<int> out;
  for (const auto& l : labels) out.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
  return out;
}

inline std::vector<std::set<int>> intern_sets(const std::vector<std::vector<std::string>>& sets,
                                              std::map<std::string, int>& ids) {
  std::vector<std::set<int>> out;
  for (const auto& s : sets) {
    std::set<int> ints;
    for (const auto& l : s) ints.insert(ids.emplace(l, static_cast<int>(ids.size())).first->second);
    out.push_back(std::move(ints));
  }
  return out;
}

}  // namespace detail

/// Embeds a dataset through the port and scores it with its family metric. Query-side texts get
/// the instruction; symmetric families (Btxt, PrClf, STS) apply it to both sides.
inline MetricResult evaluate_dataset(const LabeledDataset& ds, EncoderPort& encoder, const std::string& instruction,
                                     std::uint64_t seed) {
  if (!body_matches(ds.family, ds.body)) throw ValidationError("dataset shape does not match its family");
  return std::visit(
      [&](const auto& d) -> MetricResult {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BitextData>) {
          std::vector<int> gold(d.src.size());
          for (std::size_t i = 0; i < gold.size(); ++i) gold[i] = static_cast<int>(i);
          return bitext_f1(encoder.embed(d.src, instruction), encoder.embed(d.tgt, instruction), gold);
        } else if constexpr (std::is_same_v<T, ClassificationData>) {
          std::map<std::string, int> ids;
          const auto train = detail::intern(d.train_labels, ids);
          const auto test = detail::intern(d.test_labels, ids);
          return linear_probe(encoder.embed(d.train_texts, instruction), train, encoder.embed(d.test_texts, instruction),
                              test, 1.0, seed);
        } else if constexpr (std::is_same_v<T, MultiLabelData>) {
          std::map<std::string, int> ids;
          const auto train = detail::intern_sets(d.train_labels, ids);
          const auto test = detail::intern_sets(d.test_labels, ids);
          return multilabel_eval(encoder.embed(d.train_texts, instruction), train,
                                 encoder.embed(d.test_texts, instruction), test);
        } else if constexpr (std::is_same_v<T, PairData>) {
          return pair_classification(encoder.embed(d.text1, instruction), encoder.embed(d.text2, instruction), d.labels);
        } else if constexpr (std::is_same_v<T, ClusteringData>) {
          std::map<std::string, int> ids;
          return cluster_vmeasure(encoder.embed(d.texts, instruction), detail::intern(d.clusters, ids), 0, seed);
        } else if constexpr (std::is_same_v<T, StsData>) {
          return sts_spearman(encoder.embed(d.text1, instruction), encoder.embed(d.text2, instruction), d.scores);
        } else if constexpr (std::is_same_v<T, RetrievalData>) {
          return retrieval_ndcg(encoder.embed(d.queries, instruction), encoder.embed(d.corpus), d.qrels);
        } else {
          std::vector<Matrix> cands;
          for (const auto& c : d.candidates) cands.push_back(encoder.embed(c));
          return rerank_map(encoder.embed(d.queries, instruction), cands, d.labels);
        }
      },
      ds.body);
}

}  // namespace afrie5
