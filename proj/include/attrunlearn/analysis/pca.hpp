// Copyright 2026 The attrunlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "attrunlearn/common.hpp"

namespace attrunlearn::analysis {

struct Projection {
  Matrix coords;              // N x dims
  Matrix components;          // dims x K, unit rows
  Vector singular_values;     // dims entries, descending
  bool rank_deficient = false;
};

// Projects mean-centered rows onto the top principal directions. Each
// direction is oriented so that its largest-magnitude loading is positive
// (first such loading on ties). Directions beyond the numerical rank are
// left as zero coordinates and the result is flagged.
inline Projection pca_project(const MatrixRef& theta, int dims = 2) {
  if (theta.rows() < 2) throw Error("pca_project: need at least two rows");
  if (dims < 1) throw Error("pca_project: dims must be >= 1");
  const Eigen::RowVectorXd mean = theta.colwise().mean();
  const Eigen::MatrixXd centered = theta.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  Projection out;
  out.coords = Matrix::Zero(theta.rows(), dims);
  out.components = Matrix::Zero(dims, theta.cols());
  out.singular_values = Vector::Zero(dims);
  const double tol = (s.size() > 0 ? s[0] : 0.0) *
                     static_cast<double>(std::max(theta.rows(), theta.cols())) *
                     Eigen::NumTraits<double>::epsilon();
  for (int d = 0; d < dims; ++d) {
    if (d >= s.size() || !(s[d] > tol)) {
      out.rank_deficient = true;
      continue;
    }
    Eigen::VectorXd dir = v.col(d);
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < dir.size(); ++k) {
      if (std::abs(dir[k]) > std::abs(dir[arg])) arg = k;
    }
    if (dir[arg] < 0.0) dir = -dir;
    out.components.row(d) = dir.transpose();
    out.singular_values[d] = s[d];
    out.coords.col(d) = centered * dir;
  }
  return out;
}

}  // namespace attrunlearn::analysis
