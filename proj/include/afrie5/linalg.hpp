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

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "afrie5/error.hpp"

namespace afrie5 {

// Rows are embeddings; row-major keeps each embedding contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kUnitNormTolerance = 1e-6;

inline bool rows_unit_norm(const Matrix& m, double tol = kUnitNormTolerance) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).norm() - 1.0) > tol) return false;
  }
  return true;
}

inline void require_unit_rows(const Matrix& m, const std::string& what) {
  if (!rows_unit_norm(m)) {
    throw ValidationError(what + ": rows must be unit-norm");
  }
}

/// L2-normalizes every row; a zero row is an error.
inline Matrix normalize_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ValidationError("degenerate embedding");
    }
    m.row(i) /= n;
  }
  return m;
}

}  // namespace afrie5
