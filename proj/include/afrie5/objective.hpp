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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "afrie5/error.hpp"
#include "afrie5/linalg.hpp"

namespace afrie5 {

inline constexpr double kDefaultTemperature = 0.02;

// Index algebra of a (B, G) batch. Passages are laid out query-major: query i owns the flat
// columns [shard_offset + i*G, shard_offset + (i+1)*G), the first of which is its positive.
struct BatchLayout {
  int queries = 1;      // B
  int group_size = 1;   // G
  int shard_offset = 0;
  int total_passages = 1;

  static BatchLayout single(int queries, int group_size) {
    return BatchLayout{queries, group_size, 0, queries * group_size};
  }

  int positive_index(int query) const { return shard_offset + query * group_size; }

  void validate() const {
    if (queries < 1 || group_size < 1) throw ValidationError("batch layout needs B >= 1 and G >= 1");
    if (shard_offset < 0) throw ValidationError("batch layout shard_offset must be non-negative");
    if (positive_index(queries - 1) + group_size > total_passages) {
      throw ValidationError("batch layout groups exceed total_passages");
    }
  }
};

struct SimilarityBlock {
  Matrix scores;  // B x total_passages
  double temperature = kDefaultTemperature;
};

struct TeacherDistribution {
  Matrix probs;  // B x G, rows sum to 1
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // dLoss/dS, same shape as the similarity block
};

inline SimilarityBlock similarity_matrix(const Matrix& queries, const Matrix& passages,
                                         double temperature = kDefaultTemperature) {
  if (queries.cols() != passages.cols()) {
    throw ValidationError("similarity_matrix: embedding dimensions differ (" + std::to_string(queries.cols()) +
                          " vs " + std::to_string(passages.cols()) + ")");
  }
  return SimilarityBlock{queries * passages.transpose(), temperature};
}

namespace detail {

inline void require_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("temperature must be positive");
}

// Row softmax of x/temperature with max subtraction; returns log-sum-exp of the scaled row.
inline double softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double temperature,
                          Eigen::RowVectorXd& probs) {
  const Eigen::RowVectorXd z = row / temperature;
  const double m = z.maxCoeff();
  probs = (z.array() - m).exp();
  const double sum = probs.sum();
  probs /= sum;
  return m + std::log(sum);
}

}  // namespace detail

/// InfoNCE over every passage in the (pooled) batch:
///   loss = -(1/B) sum_i log softmax(S[i,:]/tau)[pos_i].
inline LossAndGrad contrastive_loss(const SimilarityBlock& block, const BatchLayout& layout) {
  detail::require_temperature(block.temperature);
  layout.validate();
  if (block.scores.rows() != layout.queries || block.scores.cols() != layout.total_passages) {
    throw ValidationError("contrastive_loss: block shape does not match the layout");
  }
  const double tau = block.temperature;
  const double inv_b = 1.0 / layout.queries;
  LossAndGrad out{0.0, Matrix::Zero(block.scores.rows(), block.scores.cols())};
  Eigen::RowVectorXd probs;
  for (int i = 0; i < layout.queries; ++i) {
    const int pos = layout.positive_index(i);
    const double lse = detail::softmax_row(block.scores.row(i), tau, probs);
    out.loss += (lse - block.scores(i, pos) / tau) * inv_b;
    probs(pos) -= 1.0;
    out.grad.row(i) = probs * (inv_b / tau);
  }
  return out;
}

/// Contrastive loss when query rows live on separate shards but every shard scores against the
/// same pooled passage set. Shards are combined in index order; the result equals the
/// single-block loss on the row-concatenated matrix.
inline LossAndGrad pooled_contrastive_loss(std::span<const SimilarityBlock> shards,
                                           std::span<const BatchLayout> layouts) {
  if (shards.size() != layouts.size() || shards.empty()) {
    throw ValidationError("pooled_contrastive_loss: one layout per shard required");
  }
  int total_queries = 0;
  Eigen::Index cols = shards[0].scores.cols();
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (shards[k].scores.cols() != cols) throw ValidationError("pooled shards disagree on the passage count");
    total_queries += layouts[k].queries;
  }
  LossAndGrad out{0.0, Matrix::Zero(total_queries, cols)};
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const LossAndGrad part = contrastive_loss(shards[k], layouts[k]);
    const double weight = static_cast<double>(layouts[k].queries) / total_queries;
    out.loss += part.loss * weight;
    out.grad.middleRows(row, layouts[k].queries) = part.grad * weight;
    row += layouts[k].queries;
  }
  return out;
}

/// Row softmax of raw teacher scores at temperature 1.
inline TeacherDistribution teacher_normalize(const Matrix& raw_scores) {
  if (!raw_scores.allFinite()) throw ValidationError("teacher scores must be finite");
  TeacherDistribution out{Matrix(raw_scores.rows(), raw_scores.cols())};
  Eigen::RowVectorXd probs;
  for (Eigen::Index i = 0; i < raw_scores.rows(); ++i) {
    detail::softmax_row(raw_scores.row(i), 1.0, probs);
    out.probs.row(i) = probs;
  }
  return out;
}

inline constexpr double kDistributionTolerance = 1e-9;

/// Cross-entropy of the student's in-group softmax (at tau) against the teacher distribution:
///   loss = -(1/B) sum_i sum_j P_teacher[i,j] log P_student[i,j].
inline LossAndGrad kd_loss(const SimilarityBlock& block, const TeacherDistribution& teacher,
                           const BatchLayout& layout) {
  detail::require_temperature(block.temperature);
  layout.validate();
  if (block.scores.rows() != layout.queries || block.scores.cols() != layout.total_passages) {
    throw ValidationError("kd_loss: block shape does not match the layout");
  }
  if (teacher.probs.rows() != layout.queries || teacher.probs.cols() != layout.group_size) {
    throw ValidationError("kd_loss: teacher shape must be B x G");
  }
  for (Eigen::Index i = 0; i < teacher.probs.rows(); ++i) {
    if ((teacher.probs.row(i).array() < 0.0).any() ||
        std::abs(teacher.probs.row(i).sum() - 1.0) > kDistributionTolerance) {
      throw ValidationError("kd_loss: teacher row " + std::to_string(i) + " is not normalized");
    }
  }
  const double tau = block.temperature;
  const double inv_b = 1.0 / layout.queries;
  const int g = layout.group_size;
  LossAndGrad out{0.0, Matrix::Zero(block.scores.rows(), block.scores.cols())};
  Eigen::RowVectorXd probs;
  for (int i = 0; i < layout.queries; ++i) {
    const int start = layout.positive_index(i);
    const auto group = block.scores.row(i).segment(start, g);
    const double lse = detail::softmax_row(group, tau, probs);
    const Eigen::RowVectorXd pt = teacher.probs.row(i);
    // log P_student[j] = S[j]/tau - lse
    out.loss -= inv_b * (pt.array() * (group.array() / tau - lse)).sum();
    out.grad.row(i).segment(start, g) = (probs - pt) * (inv_b / tau);
  }
  return out;
}

inline double total_loss(double contrastive, double kd) { return kd + contrastive; }

inline LossAndGrad total_loss(const LossAndGrad& contrastive, const LossAndGrad& kd) {
  return LossAndGrad{total_loss(contrastive.loss, kd.loss), contrastive.grad + kd.grad};
}

/// Mean Shannon entropy of the teacher rows: the lower bound of kd_loss.
inline double mean_row_entropy(const TeacherDistribution& teacher) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < teacher.probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < teacher.probs.cols(); ++j) {
      const double p = teacher.probs(i, j);
      if (p > 0.0) h -= p * std::log(p);
    }
  }
  return h / static_cast<double>(teacher.probs.rows());
}

// Gradients of S = Q P^T back to the embeddings.
inline Matrix grad_wrt_queries(const Matrix& grad_s, const Matrix& passages) { return grad_s * passages; }
inline Matrix grad_wrt_passages(const Matrix& grad_s, const Matrix& queries) {
  return grad_s.transpose() * queries;
}

}  // namespace afrie5
