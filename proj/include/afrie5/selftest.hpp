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
#include <random>
#include <string>
#include <vector>

#include "afrie5/objective.hpp"
#include "afrie5/pipeline.hpp"
#include "afrie5/registry.hpp"
#include "afrie5/synthetic.hpp"
#include "afrie5/trainer.hpp"

namespace afrie5 {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest {

inline std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "abcdefgh ";
  std::uniform_int_distribution<int> len(2, 9);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
  return s;
}

/// Random small batch plus tiny toy encoder for finite-difference checks.
struct GradCase {
  Batch batch;
  ToyEncoderParams params;
  TrainConfig cfg;
};

inline GradCase random_grad_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 4);
  std::uniform_real_distribution<double> temp(0.05, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradCase c;
  const int b = size(rng), g = size(rng);
  c.cfg.batch_size = b;
  c.cfg.group_size = g;
  c.cfg.temperature = temp(rng);
  c.cfg.use_kd = true;
  c.params = ToyEncoderParams::init(rng(), 3, 7, 2, 1.0);
  Matrix teacher(b, g);
  for (int i = 0; i < b; ++i) {
    c.batch.queries.push_back(random_text(rng));
    for (int k = 0; k < g; ++k) {
      c.batch.passages.push_back(random_text(rng));
      teacher(i, k) = normal(rng);
    }
  }
  c.batch.teacher_raw = teacher;
  return c;
}

/// Largest entrywise relative error between the analytic and central-difference gradients.
inline double gradient_error(const GradCase& c, double h = 1e-6) {
  const StepResult analytic = batch_loss_and_grad(c.batch, c.params, c.cfg);
  double worst = 0.0;
  ToyEncoderParams p = c.params;
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) {
    const double w = p.weights.data()[i];
    p.weights.data()[i] = w + h;
    const double up = batch_loss_and_grad(c.batch, p, c.cfg).loss;
    p.weights.data()[i] = w - h;
    const double down = batch_loss_and_grad(c.batch, p, c.cfg).loss;
    p.weights.data()[i] = w;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.grad_w.data()[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

inline CheckResult check_gradients(int cases = 20, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) worst = std::max(worst, gradient_error(random_grad_case(rng)));
  return {"gradient finite differences", worst <= 1e-5, "max relative error " + std::to_string(worst)};
}

inline CheckResult check_uniform_loss() {
  double worst = 0.0;
  for (int b = 1; b <= 4; ++b) {
    for (int g = 1; g <= 4; ++g) {
      SimilarityBlock block{Matrix::Constant(b, b * g, 0.3), 0.02};
      const double loss = contrastive_loss(block, BatchLayout::single(b, g)).loss;
      worst = std::max(worst, std::abs(loss - std::log(static_cast<double>(b * g))));
    }
  }
  return {"uniform similarity loss equals ln(BG)", worst <= 1e-12, "max error " + std::to_string(worst)};
}

inline CheckResult check_pooled(int cases = 50, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) {
    const int b1 = size(rng), b2 = size(rng), g = size(rng);
    const int total = (b1 + b2) * g;
    Matrix s(b1 + b2, total);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = normal(rng);
    const double full = contrastive_loss({s, 0.05}, BatchLayout::single(b1 + b2, g)).loss;
    const std::vector<SimilarityBlock> shards = {{s.topRows(b1), 0.05}, {s.bottomRows(b2), 0.05}};
    const std::vector<BatchLayout> layouts = {{b1, g, 0, total}, {b2, g, b1 * g, total}};
    worst = std::max(worst, std::abs(pooled_contrastive_loss(shards, layouts).loss - full));
  }
  return {"pooled shards equal single batch", worst <= 1e-12, "max error " + std::to_string(worst)};
}

inline CheckResult check_expansion() {
  const auto examples = synthetic_nli(34, 3);
  std::vector<LangCode> langs = lite_languages();
  ExpansionSettings s;
  s.target_langs = langs;
  const TranslationCache cache(synthetic_translations(default_world(), examples, langs, 5));
  std::size_t pairs = 0;
  for (const auto& ex : examples) pairs += expand_example(ex, cache.for_example(ex.id), s).size();
  const std::size_t expected = examples.size() * (3 * langs.size() + 1);
  return {"expansion cardinality", pairs == expected, std::to_string(pairs) + " pairs"};
}

inline CheckResult check_fixture(const std::string& file, double tolerance) {
  const auto fixture = load_results_fixture(file);
  const std::vector<Family> families(fixture.columns.size(), Family::kClf);
  double worst = 0.0;
  for (const auto& row : fixture.rows) {
    std::vector<Family> fams = families;
    if (fixture.aggregation == Aggregation::kFamilyMacro) {
      for (std::size_t i = 0; i < fams.size(); ++i) fams[i] = parse_family(fixture.columns[i]).value();
    }
    const double overall = summarize_fixture_row(fixture.columns, fams, row, fixture.aggregation).overall;
    worst = std::max(worst, std::abs(overall - row.average));
  }
  return {"fixture " + file, worst <= tolerance + 1e-9, "max deviation " + std::to_string(worst)};
}

inline CheckResult check_per_language() {
  const auto fixture = load_per_language_fixture();
  double worst = 0.0;
  for (const auto& [task, rows] : fixture.tasks) {
    for (const auto& row : rows) {
      ScoreTable t;
      for (std::size_t i = 0; i < row.scores.size(); ++i) {
        if (row.scores[i]) t.set(task, Family::kClf, fixture.languages[i], *row.scores[i]);
      }
      worst = std::max(worst, std::abs(aggregate(t, Aggregation::kTaskMacro).overall - row.average));
    }
  }
  return {"fixture per_language.json", worst <= 0.005 + 1e-9, "max deviation " + std::to_string(worst)};
}

}  // namespace selftest

/// Oracle checks runnable from the command line.
inline std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> out;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded("gradient finite differences", [] { return selftest::check_gradients(); });
  guarded("uniform similarity loss", [] { return selftest::check_uniform_loss(); });
  guarded("pooled shards", [] { return selftest::check_pooled(); });
  guarded("expansion cardinality", [] { return selftest::check_expansion(); });
  guarded("fixture lite_results.json", [] { return selftest::check_fixture("lite_results.json", 0.05); });
  guarded("fixture full_results.json", [] { return selftest::check_fixture("full_results.json", 0.05); });
  guarded("fixture per_language.json", [] { return selftest::check_per_language(); });
  return out;
}

}  // namespace afrie5
