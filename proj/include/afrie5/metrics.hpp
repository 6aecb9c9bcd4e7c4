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
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "afrie5/error.hpp"
#include "afrie5/linalg.hpp"

namespace afrie5 {

enum class Family { kBtxt, kPrClf, kClf, kMultiClf, kClust, kSts, kRtrvl, kRrnk };

inline constexpr Family kAllFamilies[] = {Family::kBtxt,  Family::kPrClf, Family::kClf,   Family::kMultiClf,
                                          Family::kClust, Family::kSts,   Family::kRtrvl, Family::kRrnk};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::kBtxt: return "Btxt";
    case Family::kPrClf: return "PrClf";
    case Family::kClf: return "Clf";
    case Family::kMultiClf: return "MultiClf";
    case Family::kClust: return "Clust";
    case Family::kSts: return "STS";
    case Family::kRtrvl: return "Rtrvl";
    case Family::kRrnk: return "Rrnk";
  }
  return "";
}

inline std::optional<Family> parse_family(std::string_view s) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

/// Lowest admissible main score: STS reports a correlation, everything else a rate.
inline double min_main_score(Family f) { return f == Family::kSts ? -1.0 : 0.0; }

struct MetricResult {
  Family family = Family::kBtxt;
  double main_score = 0.0;  // in [0,1] ([-1,1] for STS); reported x100
  std::map<std::string, double> aux;
};

namespace detail {

/// Index of the row maximum, ties to the lowest index.
inline Eigen::Index argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

/// Indices sorted by descending score, ties by lowest index.
inline std::vector<int> rank_desc(const Eigen::Ref<const Eigen::RowVectorXd>& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Threshold-based average precision: sum over distinct score thresholds of
/// (recall gain) x (precision at that threshold). Ties form one threshold.
inline double threshold_average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]] == 1;
      seen += 1;
      ++j;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

/// Rank-based average precision of a binary relevance list already in rank order.
inline double ranked_average_precision(const std::vector<int>& relevance_in_rank_order) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < relevance_in_rank_order.size(); ++r) {
    if (relevance_in_rank_order[r]) {
      hits += 1;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  return hits > 0 ? sum / hits : 0.0;
}

inline double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bitext mining

/// gold[i] is the target row paired with source row i (a bijection). Precision counts sources
/// whose nearest target is gold; recall counts targets whose nearest source is gold.
inline MetricResult bitext_f1(const Matrix& src, const Matrix& tgt, const std::vector<int>& gold) {
  if (src.rows() == 0 || tgt.rows() == 0) throw ValidationError("bitext_f1: empty input");
  if (src.rows() != tgt.rows() || static_cast<Eigen::Index>(gold.size()) != src.rows()) {
    throw ValidationError("bitext_f1: source, target and gold counts differ");
  }
  std::vector<int> inverse(gold.size(), -1);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= static_cast<int>(gold.size()) || inverse[gold[i]] != -1) {
      throw ValidationError("bitext_f1: gold is not a bijection");
    }
    inverse[gold[i]] = static_cast<int>(i);
  }
  const Matrix sims = src * tgt.transpose();
  double src_hits = 0.0, tgt_hits = 0.0;
  for (Eigen::Index i = 0; i < sims.rows(); ++i) {
    src_hits += detail::argmax_row(sims.row(i)) == gold[static_cast<std::size_t>(i)];
  }
  const Matrix sims_t = sims.transpose();
  for (Eigen::Index j = 0; j < sims_t.rows(); ++j) {
    tgt_hits += detail::argmax_row(sims_t.row(j)) == inverse[static_cast<std::size_t>(j)];
  }
  const double n = static_cast<double>(gold.size());
  const double precision = src_hits / n;
  const double recall = tgt_hits / n;
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return MetricResult{Family::kBtxt, f1, {{"precision", precision}, {"recall", recall}}};
}

// ---------------------------------------------------------------------------
// Linear probes

struct ProbeSettings {
  double l2 = 1.0;
  double grad_tolerance = 1e-4;
  int max_iterations = 1000;
};

/// Multinomial logistic regression on [x, 1] fitted by full-batch gradient descent on
///   (1/n) sum CE + (l2 / 2n) |W|^2   (bias unregularized).
class SoftmaxProbe {
 public:
  SoftmaxProbe(const Matrix& x, const std::vector<int>& labels, int classes, const ProbeSettings& s) {
    const auto n = x.rows();
    const auto d = x.cols();
    weights_ = Matrix::Zero(classes, d);
    bias_ = Vector::Zero(classes);
    Matrix y = Matrix::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
    const double max_sq = x.rowwise().squaredNorm().maxCoeff() + 1.0;
    const double step = 1.0 / (0.5 * max_sq + s.l2 / static_cast<double>(n));
    for (iterations_ = 0; iterations_ < s.max_iterations; ++iterations_) {
      Matrix p = probabilities(x);
      p -= y;
      Matrix gw = (p.transpose() * x) / static_cast<double>(n) + (s.l2 / static_cast<double>(n)) * weights_;
      Vector gb = p.colwise().sum().transpose() / static_cast<double>(n);
      const double norm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
      if (norm <= s.grad_tolerance) break;
      weights_ -= step * gw;
      bias_ -= step * gb;
    }
  }

  Matrix probabilities(const Matrix& x) const {
    Matrix z = x * weights_.transpose();
    z.rowwise() += bias_.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double m = z.row(i).maxCoeff();
      z.row(i) = (z.row(i).array() - m).exp();
      z.row(i) /= z.row(i).sum();
    }
    return z;
  }

  std::vector<int> predict(const Matrix& x) const {
    const Matrix p = probabilities(x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(detail::argmax_row(p.row(i)));
    return out;
  }

  int iterations() const { return iterations_; }

 private:
  Matrix weights_;
  Vector bias_;
  int iterations_ = 0;
};

/// Fits a probe on the training embeddings and returns test accuracy. Labels are arbitrary
/// integers; a test label never seen in training counts as an error. Full-batch fitting from a
/// zero start is deterministic, so the seed only exists for interface uniformity.
inline MetricResult linear_probe(const Matrix& train_emb, const std::vector<int>& train_labels, const Matrix& test_emb,
                                 const std::vector<int>& test_labels, double l2 = 1.0,
                                 [[maybe_unused]] std::uint64_t seed = 0) {
  if (train_emb.rows() != static_cast<Eigen::Index>(train_labels.size()) ||
      test_emb.rows() != static_cast<Eigen::Index>(test_labels.size())) {
    throw ValidationError("linear_probe: embeddings and labels differ in length");
  }
  if (test_emb.rows() == 0) throw ValidationError("linear_probe: empty test set");
  if (train_emb.cols() != test_emb.cols()) throw ValidationError("linear_probe: dimension mismatch");
  std::map<int, int> classes;
  for (int l : train_labels) classes.emplace(l, 0);
  if (classes.size() < 2) throw ValidationError("linear_probe: training set needs at least 2 classes");
  int next = 0;
  std::vector<int> class_of;
  for (auto& [label, idx] : classes) {
    idx = next++;
    class_of.push_back(label);
  }
  std::vector<int> y;
  y.reserve(train_labels.size());
  for (int l : train_labels) y.push_back(classes.at(l));
  const SoftmaxProbe probe(train_emb, y, next, ProbeSettings{l2});
  const auto pred = probe.predict(test_emb);
  double correct = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += class_of[static_cast<std::size_t>(pred[i])] == test_labels[i];
  return MetricResult{Family::kClf, correct / static_cast<double>(pred.size()),
                      {{"iterations", static_cast<double>(probe.iterations())}}};
}

/// Label-ranking average precision. Items whose gold set is empty or the full universe score 1.
inline double label_ranking_average_precision(const std::vector<std::vector<double>>& scores,
                                              const std::vector<std::set<int>>& gold) {
  if (scores.empty()) throw ValidationError("lrap: no items");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& g = gold[i];
    if (g.empty() || g.size() == s.size()) {
      total += 1.0;
      continue;
    }
    double item = 0.0;
    for (int l : g) {
      double rank = 0.0, gold_rank = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] >= s[static_cast<std::size_t>(l)]) {
          rank += 1;
          gold_rank += g.count(static_cast<int>(k)) ? 1 : 0;
        }
      }
      item += gold_rank / rank;
    }
    total += item / static_cast<double>(g.size());
  }
  return total / static_cast<double>(scores.size());
}

/// One-vs-rest probes per label; main = LRAP of the probe probabilities, aux macro_f1 at 0.5.
inline MetricResult multilabel_eval(const Matrix& train_emb, const std::vector<std::set<int>>& train_labelsets,
                                    const Matrix& test_emb, const std::vector<std::set<int>>& test_labelsets,
                                    double l2 = 1.0) {
  if (train_emb.rows() != static_cast<Eigen::Index>(train_labelsets.size()) ||
      test_emb.rows() != static_cast<Eigen::Index>(test_labelsets.size())) {
    throw ValidationError("multilabel_eval: embeddings and label sets differ in length");
  }
  std::set<int> universe;
  for (const auto& s : train_labelsets) universe.insert(s.begin(), s.end());
  for (const auto& s : test_labelsets) universe.insert(s.begin(), s.end());
  if (universe.empty()) throw ValidationError("multilabel_eval: empty label universe");
  if (test_emb.rows() == 0) throw ValidationError("multilabel_eval: empty test set");
  const std::vector<int> labels(universe.begin(), universe.end());
  std::map<int, std::size_t> column;
  for (std::size_t k = 0; k < labels.size(); ++k) column[labels[k]] = k;

  const auto n_test = static_cast<std::size_t>(test_emb.rows());
  std::vector<std::vector<double>> scores(n_test, std::vector<double>(labels.size(), 0.0));
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::vector<int> y;
    for (const auto& s : train_labelsets) y.push_back(s.count(labels[k]) ? 1 : 0);
    const auto positives = std::count(y.begin(), y.end(), 1);
    if (positives == 0 || positives == static_cast<long>(y.size())) {
      for (auto& row : scores) row[k] = positives == 0 ? 0.0 : 1.0;
      continue;
    }
    const SoftmaxProbe probe(train_emb, y, 2, ProbeSettings{l2});
    const Matrix p = probe.probabilities(test_emb);
    for (std::size_t i = 0; i < n_test; ++i) scores[i][k] = p(static_cast<Eigen::Index>(i), 1);
  }

  std::vector<std::set<int>> gold;
  for (const auto& s : test_labelsets) {
    std::set<int> g;
    for (int l : s) g.insert(static_cast<int>(column.at(l)));
    gold.push_back(std::move(g));
  }
  const double lrap = label_ranking_average_precision(scores, gold);

  double f1_sum = 0.0;
  int f1_count = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
      const bool pred = scores[i][k] >= 0.5;
      const bool truth = gold[i].count(static_cast<int>(k)) > 0;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    if (tp + fp + fn == 0) continue;  // label absent from test and never predicted
    f1_sum += 2 * tp / (2 * tp + fp + fn);
    ++f1_count;
  }
  return MetricResult{Family::kMultiClf, lrap, {{"macro_f1", f1_count ? f1_sum / f1_count : 0.0}}};
}

// ---------------------------------------------------------------------------
// Pair classification

/// Dot-product similarity per pair ranks the positives; main = average precision, aux accuracy
/// = best accuracy over all midpoint thresholds.
inline MetricResult pair_classification(const Matrix& left, const Matrix& right, const std::vector<int>& labels) {
  if (left.rows() != right.rows() || left.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ValidationError("pair_classification: pair and label counts differ");
  }
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = std::count(labels.begin(), labels.end(), 0);
  if (pos + neg != static_cast<long>(labels.size())) throw ValidationError("pair_classification: labels must be 0/1");
  if (pos == 0 || neg == 0) throw ValidationError("pair_classification: need both positive and negative pairs");
  std::vector<double> sims(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sims[i] = left.row(static_cast<Eigen::Index>(i)).dot(right.row(static_cast<Eigen::Index>(i)));
  }
  const double ap = detail::threshold_average_precision(sims, labels);

  std::vector<double> distinct = sims;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> cuts{distinct.front() - 1.0};
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) cuts.push_back((distinct[i] + distinct[i + 1]) / 2.0);
  cuts.push_back(distinct.back() + 1.0);
  double best = 0.0;
  for (double c : cuts) {
    double correct = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i) correct += (sims[i] > c ? 1 : 0) == labels[i];
    best = std::max(best, correct / static_cast<double>(sims.size()));
  }
  return MetricResult{Family::kPrClf, ap, {{"accuracy", best}}};
}

// ---------------------------------------------------------------------------
// Clustering

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centers;
  double inertia = 0.0;
};

/// Lloyd iterations from a seeded k-means++ start; ties go to the lowest center index.
inline KMeansResult kmeans(const Matrix& x, int k, std::mt19937_64& rng, int max_iterations = 300) {
  const auto n = x.rows();
  KMeansResult r;
  r.centers.resize(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  r.centers.row(0) = x.row(first(rng));
  Vector d2 = (x.rowwise() - r.centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index chosen = 0;
    const double total = d2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target && d2(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    r.centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - r.centers.row(c)).rowwise().squaredNorm());
  }
  r.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    r.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - r.centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (x.row(i) - r.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      r.inertia += best_d;
      if (r.assignment[static_cast<std::size_t>(i)] != best) {
        r.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignment[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(r.assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) r.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  return r;
}

/// Harmonic mean of homogeneity and completeness (natural log). A zero class or cluster
/// entropy counts as perfectly homogeneous or complete respectively.
inline double v_measure(const std::vector<int>& gold, const std::vector<int>& predicted) {
  if (gold.size() != predicted.size() || gold.empty()) throw ValidationError("v_measure: length mismatch");
  std::map<int, int> gi, pi;
  for (int g : gold) gi.emplace(g, static_cast<int>(gi.size()));
  for (int p : predicted) pi.emplace(p, static_cast<int>(pi.size()));
  const double n = static_cast<double>(gold.size());
  std::vector<std::vector<double>> table(gi.size(), std::vector<double>(pi.size(), 0.0));
  std::vector<double> gc(gi.size(), 0.0), pc(pi.size(), 0.0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto a = static_cast<std::size_t>(gi[gold[i]]);
    const auto b = static_cast<std::size_t>(pi[predicted[i]]);
    table[a][b] += 1;
    gc[a] += 1;
    pc[b] += 1;
  }
  const double hc = detail::entropy(gc, n);
  const double hk = detail::entropy(pc, n);
  double hc_given_k = 0.0, hk_given_c = 0.0;
  for (std::size_t a = 0; a < gc.size(); ++a) {
    for (std::size_t b = 0; b < pc.size(); ++b) {
      const double c = table[a][b];
      if (c == 0) continue;
      hc_given_k -= (c / n) * std::log(c / pc[b]);
      hk_given_c -= (c / n) * std::log(c / gc[a]);
    }
  }
  const double homogeneity = hc == 0.0 ? 1.0 : 1.0 - hc_given_k / hc;
  const double completeness = hk == 0.0 ? 1.0 : 1.0 - hk_given_c / hk;
  if (homogeneity + completeness == 0.0) return 0.0;
  return std::clamp(2 * homogeneity * completeness / (homogeneity + completeness), 0.0, 1.0);
}

/// k-means++ (best of restarts by inertia) then V-measure against gold. k = 0 means the number
/// of distinct gold clusters.
inline MetricResult cluster_vmeasure(const Matrix& emb, const std::vector<int>& gold, int k = 0,
                                     std::uint64_t seed = 0, int restarts = 10) {
  if (emb.rows() != static_cast<Eigen::Index>(gold.size())) throw ValidationError("cluster_vmeasure: length mismatch");
  if (gold.empty()) throw ValidationError("cluster_vmeasure: empty input");
  if (k == 0) k = static_cast<int>(std::set<int>(gold.begin(), gold.end()).size());
  if (k < 1) throw ValidationError("cluster_vmeasure: k must be at least 1");
  if (k > emb.rows()) throw ValidationError("cluster_vmeasure: k exceeds the number of points");
  std::mt19937_64 rng(seed);
  std::optional<KMeansResult> best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    KMeansResult run = kmeans(emb, k, rng);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  return MetricResult{Family::kClust, v_measure(gold, best->assignment), {{"inertia", best->inertia}}};
}

// ---------------------------------------------------------------------------
// STS

/// Spearman correlation between per-pair dot products and gold scores (average ranks for ties).
inline MetricResult sts_spearman(const Matrix& left, const Matrix& right, const std::vector<double>& gold) {
  if (left.rows() != right.rows() || left.rows() != static_cast<Eigen::Index>(gold.size())) {
    throw ValidationError("sts_spearman: pair and score counts differ");
  }
  if (gold.size() < 2) throw ValidationError("sts_spearman: need at least 2 pairs");
  if (std::all_of(gold.begin(), gold.end(), [&](double g) { return g == gold.front(); })) {
    throw ValidationError("undefined correlation: gold scores are constant");
  }
  std::vector<double> sims(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    sims[i] = left.row(static_cast<Eigen::Index>(i)).dot(right.row(static_cast<Eigen::Index>(i)));
  }
  const double rho = detail::pearson(detail::average_ranks(sims), detail::average_ranks(gold));
  return MetricResult{Family::kSts, rho, {{"pearson", detail::pearson(sims, gold)}}};
}

// ---------------------------------------------------------------------------
// Retrieval and reranking

/// Binary-relevance nDCG@k averaged over queries. A query without relevant documents is an
/// error unless skip_empty is set, in which case it is left out of the mean.
inline MetricResult retrieval_ndcg(const Matrix& query_emb, const Matrix& corpus_emb,
                                   const std::vector<std::vector<int>>& qrels, int k = 10, bool skip_empty = false) {
  if (query_emb.rows() != static_cast<Eigen::Index>(qrels.size())) {
    throw ValidationError("retrieval_ndcg: one qrel list per query required");
  }
  if (query_emb.cols() != corpus_emb.cols()) throw ValidationError("retrieval_ndcg: dimension mismatch");
  if (k < 1) throw ValidationError("retrieval_ndcg: k must be positive");
  const Matrix sims = query_emb * corpus_emb.transpose();
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index q = 0; q < sims.rows(); ++q) {
    const std::set<int> relevant(qrels[static_cast<std::size_t>(q)].begin(), qrels[static_cast<std::size_t>(q)].end());
    if (relevant.empty()) {
      if (skip_empty) continue;
      throw ValidationError("retrieval_ndcg: query " + std::to_string(q) + " has no relevant documents");
    }
    const auto order = detail::rank_desc(sims.row(q));
    double dcg = 0.0, idcg = 0.0;
    const int depth = std::min<int>(k, static_cast<int>(order.size()));
    for (int r = 0; r < depth; ++r) {
      if (relevant.count(order[static_cast<std::size_t>(r)])) dcg += 1.0 / std::log2(r + 2.0);
    }
    for (int r = 0; r < std::min<int>(k, static_cast<int>(relevant.size())); ++r) idcg += 1.0 / std::log2(r + 2.0);
    total += dcg / idcg;
    ++counted;
  }
  if (counted == 0) throw ValidationError("retrieval_ndcg: no query has relevant documents");
  return MetricResult{Family::kRtrvl, total / counted, {{"k", static_cast<double>(k)}}};
}

/// Mean over queries of rank-based average precision of each query's own candidate list.
inline MetricResult rerank_map(const Matrix& query_emb, const std::vector<Matrix>& candidate_embs,
                               const std::vector<std::vector<int>>& candidate_labels) {
  if (query_emb.rows() != static_cast<Eigen::Index>(candidate_embs.size()) ||
      candidate_embs.size() != candidate_labels.size()) {
    throw ValidationError("rerank_map: one candidate list per query required");
  }
  if (candidate_embs.empty()) throw ValidationError("rerank_map: no queries");
  double total = 0.0;
  for (std::size_t q = 0; q < candidate_embs.size(); ++q) {
    const auto& labels = candidate_labels[q];
    if (candidate_embs[q].rows() != static_cast<Eigen::Index>(labels.size())) {
      throw ValidationError("rerank_map: candidate and label counts differ for query " + std::to_string(q));
    }
    if (std::count(labels.begin(), labels.end(), 1) == 0) {
      throw ValidationError("rerank_map: query " + std::to_string(q) + " has no positive candidate");
    }
    const Eigen::RowVectorXd sims = (candidate_embs[q] * query_emb.row(static_cast<Eigen::Index>(q)).transpose()).transpose();
    std::vector<int> rel;
    for (int idx : detail::rank_desc(sims)) rel.push_back(labels[static_cast<std::size_t>(idx)] == 1);
    total += detail::ranked_average_precision(rel);
  }
  return MetricResult{Family::kRrnk, total / static_cast<double>(candidate_embs.size()), {}};
}

}  // namespace afrie5
