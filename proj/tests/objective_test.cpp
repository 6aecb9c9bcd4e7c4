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

#include <cmath>
#include <random>

#include "afrie5/objective.hpp"
#include "afrie5/selftest.hpp"
#include "oracles.hpp"

namespace afrie5 {
namespace {

Matrix from_grid(const oracle::Grid& g) {
  Matrix m(static_cast<long>(g.size()), static_cast<long>(g[0].size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g[i].size(); ++j) m(static_cast<long>(i), static_cast<long>(j)) = g[i][j];
  }
  return m;
}

oracle::Grid random_grid(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  oracle::Grid g(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
  for (auto& r : g) {
    for (auto& v : r) v = u(rng);
  }
  return g;
}

TEST(SimilarityTest, Examples) {
  const Matrix eye = Matrix::Identity(3, 3);
  EXPECT_EQ(similarity_matrix(eye, eye).scores, eye);
  Matrix q(2, 2), p(2, 2);
  q << 1, 0, 0.6, 0.8;
  p << 1, 0, 0.6, 0.8;
  const auto s = similarity_matrix(q, p, 0.5);
  EXPECT_NEAR(s.scores(0, 1), 0.6, 1e-15);
  EXPECT_NEAR(s.scores(1, 1), 1.0, 1e-15);
  EXPECT_EQ(s.temperature, 0.5);
  EXPECT_THROW(similarity_matrix(Matrix::Zero(1, 2), Matrix::Zero(1, 3)), ValidationError);
}

TEST(ContrastiveTest, SinglePassageIsZero) {
  const auto r = contrastive_loss({Matrix::Constant(1, 1, 0.7), 0.02}, BatchLayout::single(1, 1));
  EXPECT_EQ(r.loss, 0.0);
}

TEST(ContrastiveTest, UniformIsLogBG) {
  for (int b = 1; b <= 5; ++b) {
    for (int g = 1; g <= 5; ++g) {
      const auto r = contrastive_loss({Matrix::Constant(b, b * g, -0.2), 0.02}, BatchLayout::single(b, g));
      EXPECT_NEAR(r.loss, std::log(static_cast<double>(b * g)), 1e-12);
    }
  }
}

TEST(ContrastiveTest, HandBlockMatchesEnumeration) {
  const oracle::Grid s = {{1, 0, 0.5, 0}, {0, 0.5, 0, 1}};
  const auto r = contrastive_loss({from_grid(s), 1.0}, BatchLayout::single(2, 2));
  // Row 0: positive at 0; row 1: positive at 2.
  const double r0 = -std::log(std::exp(1.0) / (std::exp(1.0) + 1 + std::exp(0.5) + 1));
  const double r1 = -std::log(1.0 / (1 + std::exp(0.5) + 1 + std::exp(1.0)));
  EXPECT_NEAR(r.loss, (r0 + r1) / 2, 1e-10);
  EXPECT_NEAR(r.loss, static_cast<double>(oracle::contrastive(s, 2, 0, 1.0)), 1e-10);
}

TEST(ContrastiveTest, RandomBlocksMatchOracleAndGradRowsSumToZero) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_real_distribution<double> temp(0.02, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int b = size(rng), g = size(rng);
    const double tau = temp(rng);
    const auto grid = random_grid(rng, b, b * g);
    const auto r = contrastive_loss({from_grid(grid), tau}, BatchLayout::single(b, g));
    EXPECT_NEAR(r.loss, static_cast<double>(oracle::contrastive(grid, g, 0, tau)), 1e-10);
    for (int i = 0; i < b; ++i) EXPECT_NEAR(r.grad.row(i).sum(), 0.0, 1e-12);
  }
}

TEST(ContrastiveTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const auto grid = random_grid(rng, 3, 9);
  const SimilarityBlock block{from_grid(grid), 0.3};
  const auto layout = BatchLayout::single(3, 3);
  const auto r = contrastive_loss(block, layout);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < block.scores.size(); ++k) {
    SimilarityBlock up = block, down = block;
    up.scores.data()[k] += h;
    down.scores.data()[k] -= h;
    const double fd = (contrastive_loss(up, layout).loss - contrastive_loss(down, layout).loss) / (2 * h);
    EXPECT_NEAR(r.grad.data()[k], fd, 1e-7);
  }
}

TEST(ContrastiveTest, RejectsNonPositiveTemperature) {
  EXPECT_THROW(contrastive_loss({Matrix::Zero(1, 1), 0.0}, BatchLayout::single(1, 1)), ValidationError);
  EXPECT_THROW(contrastive_loss({Matrix::Zero(1, 1), -1.0}, BatchLayout::single(1, 1)), ValidationError);
  EXPECT_THROW(contrastive_loss({Matrix::Zero(2, 2), 1.0}, BatchLayout::single(2, 2)), ValidationError);
}

TEST(ContrastiveTest, ShiftInvariance) {
  std::mt19937_64 rng(8);
  const auto grid = random_grid(rng, 2, 6);
  Matrix shifted = from_grid(grid);
  shifted.row(0).array() += 0.37;
  shifted.row(1).array() -= 1.5;
  const auto layout = BatchLayout::single(2, 3);
  EXPECT_NEAR(contrastive_loss({from_grid(grid), 0.1}, layout).loss, contrastive_loss({shifted, 0.1}, layout).loss,
              1e-12);
}

TEST(ContrastiveTest, MonotoneInTemperatureWhenPositiveIsMax) {
  const oracle::Grid s = {{0.9, 0.2, -0.1, 0.5}};
  double prev = 1e300;
  for (double tau : {2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
    const double l = contrastive_loss({from_grid(s), tau}, BatchLayout::single(1, 4)).loss;
    EXPECT_LE(l, prev + 1e-15);
    prev = l;
  }
}

TEST(PooledTest, TwoShardsEqualSingleBatch) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int b1 = size(rng), b2 = size(rng), g = size(rng);
    const int total = (b1 + b2) * g;
    const auto grid = random_grid(rng, b1 + b2, total);
    const Matrix s = from_grid(grid);
    const auto single = contrastive_loss({s, 0.02}, BatchLayout::single(b1 + b2, g));
    const std::vector<SimilarityBlock> shards = {{s.topRows(b1), 0.02}, {s.bottomRows(b2), 0.02}};
    const std::vector<BatchLayout> layouts = {{b1, g, 0, total}, {b2, g, b1 * g, total}};
    const auto pooled = pooled_contrastive_loss(shards, layouts);
    EXPECT_NEAR(pooled.loss, single.loss, 1e-12);
    EXPECT_LT((pooled.grad - single.grad).cwiseAbs().maxCoeff(), 1e-12);
    // Offset shard oracle: the second shard's positives sit after the first shard's passages.
    const oracle::Grid second(grid.begin() + b1, grid.end());
    EXPECT_NEAR(contrastive_loss(shards[1], layouts[1]).loss,
                static_cast<double>(oracle::contrastive(second, g, b1 * g, 0.02)), 1e-10);
  }
}

TEST(KdTest, MatchingDistributionsGiveEntropy) {
  // Student at tau=1 with scores equal to teacher logits reproduces the teacher.
  Matrix raw(2, 3);
  raw << 0.3, -0.2, 0.9, 1.0, 1.0, -1.0;
  const auto teacher = teacher_normalize(raw);
  // Each query's own group holds its logits.
  Matrix s = Matrix::Zero(2, 6);
  s.block(0, 0, 1, 3) = raw.row(0);
  s.block(1, 3, 1, 3) = raw.row(1);
  const auto m = kd_loss({s, 1.0}, teacher, BatchLayout::single(2, 3));
  EXPECT_NEAR(m.loss, mean_row_entropy(teacher), 1e-12);
}

TEST(KdTest, UniformTwoWayIsLn2) {
  Matrix t(1, 2);
  t << 0.5, 0.5;
  const auto r = kd_loss({Matrix::Constant(1, 2, 0.4), 0.02}, {t}, BatchLayout::single(1, 2));
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
}

TEST(KdTest, HandThreeWayExample) {
  Matrix t(1, 3);
  t << 0.7, 0.2, 0.1;
  Matrix s(1, 3);
  s << 2, 1, 0;
  const double z = std::exp(2.0) + std::exp(1.0) + 1.0;
  const double expected = -(0.7 * std::log(std::exp(2.0) / z) + 0.2 * std::log(std::exp(1.0) / z) + 0.1 * std::log(1.0 / z));
  EXPECT_NEAR(kd_loss({s, 1.0}, {t}, BatchLayout::single(1, 3)).loss, expected, 1e-10);
}

TEST(KdTest, RandomBlocksMatchOracle) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_real_distribution<double> temp(0.02, 2.0);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int b = size(rng), g = size(rng);
    const double tau = temp(rng);
    const auto grid = random_grid(rng, b, b * g);
    oracle::Grid raw(static_cast<std::size_t>(b), std::vector<double>(static_cast<std::size_t>(g)));
    for (auto& r : raw) {
      for (auto& v : r) v = n(rng);
    }
    const auto teacher = teacher_normalize(from_grid(raw));
    const auto r = kd_loss({from_grid(grid), tau}, teacher, BatchLayout::single(b, g));
    EXPECT_NEAR(r.loss, static_cast<double>(oracle::kd(grid, raw, g, 0, tau)), 1e-10);
    EXPECT_GE(r.loss, mean_row_entropy(teacher) - 1e-12);
    // Gradient lives on each query's own group only.
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b * g; ++j) {
        if (j < i * g || j >= (i + 1) * g) {
          EXPECT_EQ(r.grad(i, j), 0.0);
        }
      }
      EXPECT_NEAR(r.grad.row(i).sum(), 0.0, 1e-12);
    }
  }
}

TEST(KdTest, Errors) {
  Matrix bad(1, 2);
  bad << 0.7, 0.7;
  EXPECT_THROW(kd_loss({Matrix::Zero(1, 2), 1.0}, {bad}, BatchLayout::single(1, 2)), ValidationError);
  EXPECT_THROW(kd_loss({Matrix::Zero(1, 2), 1.0}, {Matrix::Constant(1, 3, 1.0 / 3)}, BatchLayout::single(1, 2)),
               ValidationError);
}

TEST(TeacherNormalizeTest, Examples) {
  Matrix raw(3, 3);
  raw << 0, 0, 0, 1000, 0, 0, 1, 0, -1;
  const auto t = teacher_normalize(raw);
  EXPECT_NEAR(t.probs(0, 0), 1.0 / 3, 1e-15);
  EXPECT_TRUE(t.probs.allFinite());
  EXPECT_NEAR(t.probs(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(t.probs(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(t.probs(2, 0), 0.6652, 1e-4);
  EXPECT_NEAR(t.probs(2, 1), 0.2447, 1e-4);
  EXPECT_NEAR(t.probs(2, 2), 0.0900, 1e-4);
  Matrix two(1, 2);
  two << 0, 0;
  EXPECT_NEAR(teacher_normalize(two).probs(0, 1), 0.5, 1e-15);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(t.probs.row(i).sum(), 1.0, 1e-12);
}

TEST(TotalLossTest, SumOfParts) {
  EXPECT_EQ(total_loss(0.0, 0.0), 0.0);
  EXPECT_EQ(total_loss(0.5, 1.25), 1.75);
  LossAndGrad a{1.0, Matrix::Constant(2, 2, 1.0)}, b{2.0, Matrix::Constant(2, 2, 0.5)};
  const auto c = total_loss(a, b);
  EXPECT_EQ(c.loss, 3.0);
  EXPECT_EQ(c.grad, Matrix::Constant(2, 2, 1.5));
}

// d(total)/dW through the toy encoder on B=2, G=2 against central differences.
TEST(TotalLossTest, EndToEndGradient) {
  std::mt19937_64 rng(1234);
  for (int k = 0; k < 5; ++k) {
    auto c = selftest::random_grad_case(rng);
    c.cfg.batch_size = 2;
    c.cfg.group_size = 2;
    c.batch.queries.resize(2);
    c.batch.passages.resize(4);
    c.batch.teacher_raw = c.batch.teacher_raw->topLeftCorner(2, 2).eval();
    EXPECT_LE(selftest::gradient_error(c), 1e-5);
  }
}

}  // namespace
}  // namespace afrie5
