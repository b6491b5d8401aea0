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

#include <cmath>
#include <span>

#include "attrunlearn/common.hpp"

namespace attrunlearn {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over one parameter matrix. step() updates every entry; step_rows()
// touches only the listed rows, leaving the moments of the others as they
// were (the lazy variant used for embedding tables). Both share one step
// counter for bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index rows, Eigen::Index cols, AdamParams params = {})
      : params_(params), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

  const AdamParams& params() const { return params_; }
  long steps() const { return t_; }

  void step(Matrix& param, const MatrixRef& grad) {
    require_same_shape(param, grad, "Adam::step");
    begin_step();
    m_ = params_.beta1 * m_ + (1.0 - params_.beta1) * grad;
    v_ = params_.beta2 * v_ + (1.0 - params_.beta2) * grad.cwiseAbs2();
    param.array() -= step_size_ * m_.array() / (v_.array().sqrt() + eps_hat_);
  }

  template <typename RowIndex>
  void step_rows(Matrix& param, const Matrix& grad, std::span<const RowIndex> rows) {
    require_same_shape(param, grad, "Adam::step_rows");
    begin_step();
    for (RowIndex r : rows) {
      auto m = m_.row(r);
      auto v = v_.row(r);
      m = params_.beta1 * m + (1.0 - params_.beta1) * grad.row(r);
      v = params_.beta2 * v + (1.0 - params_.beta2) * grad.row(r).cwiseAbs2();
      param.row(r).array() -= step_size_ * m.array() / (v.array().sqrt() + eps_hat_);
    }
  }

 private:
  void begin_step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    // lr * m_hat / (sqrt(v_hat) + eps) with the corrections folded in.
    step_size_ = params_.learning_rate * std::sqrt(bc2) / bc1;
    eps_hat_ = params_.epsilon * std::sqrt(bc2);
  }

  AdamParams params_;
  Matrix m_;
  Matrix v_;
  long t_ = 0;
  double step_size_ = 0.0;
  double eps_hat_ = 0.0;
};

}  // namespace attrunlearn
