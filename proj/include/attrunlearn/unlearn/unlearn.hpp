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
#include <numeric>
#include <string>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/optim.hpp"
#include "attrunlearn/unlearn/losses.hpp"

namespace attrunlearn::unlearn {

enum class LossKind { kU2UR, kD2DR };

inline std::string to_string(LossKind kind) {
  return kind == LossKind::kU2UR ? "u2u_r" : "d2d_r";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "u2u_r" || s == "U2U-R" || s == "u2u") return LossKind::kU2UR;
  if (s == "d2d_r" || s == "D2D-R" || s == "d2d") return LossKind::kD2DR;
  throw Error(str_cat("unknown loss kind '", s, "'"));
}

// kAdam is the default: plain gradient descent at lr 1e-3 is unstable for
// U2U on a thousand users (the largest Hessian eigenvalue is 4N) and barely
// moves D2D, whose gradients are O(1/N) per row.
enum class StepRule { kAdam, kGradientDescent };

struct UnlearnConfig {
  LossKind loss_kind = LossKind::kD2DR;
  double alpha = 1e-4;
  double learning_rate = 1e-3;
  int epochs = 1000;
  Bandwidth bandwidth = Bandwidth::median();
  StepRule step_rule = StepRule::kAdam;
  int batch_rows = 0;  // 0: full batch; otherwise rows sampled per epoch
  std::uint64_t seed = 0;

  static UnlearnConfig defaults(LossKind kind) {
    UnlearnConfig c;
    c.loss_kind = kind;
    c.epochs = kind == LossKind::kU2UR ? 5000 : 1000;
    return c;
  }

  void validate() const {
    if (!(alpha >= 0.0)) throw Error("unlearn: alpha must be >= 0");
    if (!(learning_rate > 0.0)) throw Error("unlearn: learning_rate must be > 0");
    if (epochs < 0) throw Error("unlearn: epochs must be >= 0");
    if (batch_rows < 0) throw Error("unlearn: batch_rows must be >= 0");
    if (bandwidth.mode == Bandwidth::Mode::kFixed && !(bandwidth.sigma > 0.0)) {
      throw Error("unlearn: fixed bandwidth must be > 0");
    }
  }
};

struct LossValue {
  double total = 0.0;
  double distinguishability = 0.0;
  double regularization = 0.0;
};

struct LossEval {
  LossValue value;
  double sigma = 0.0;  // bandwidth used (D2D only)
  Matrix grad;         // empty unless requested
};

// total = l_u + alpha * |theta - theta_star|_F^2
inline LossEval evaluate_loss(const MatrixRef& theta, const MatrixRef& theta_star,
                              const AttributeTable& labels, const UnlearnConfig& cfg,
                              bool with_grad) {
  require_same_shape(theta, theta_star, "total_loss");
  LossEval out;
  if (cfg.loss_kind == LossKind::kU2UR) {
    out.value.distinguishability = u2u_loss(theta, labels);
    if (with_grad) out.grad = u2u_grad(theta, labels);
  } else {
    MmdEval m = mmd_groups(theta, labels, cfg.bandwidth, with_grad);
    out.value.distinguishability = m.value;
    out.sigma = m.sigma;
    if (with_grad) out.grad = std::move(m.grad);
  }
  out.value.regularization = frobenius_reg(theta, theta_star);
  out.value.total = out.value.distinguishability + cfg.alpha * out.value.regularization;
  if (with_grad) out.grad += 2.0 * cfg.alpha * (theta - theta_star);
  return out;
}

inline LossValue total_loss(const MatrixRef& theta, const MatrixRef& theta_star,
                            const AttributeTable& labels, const UnlearnConfig& cfg) {
  return evaluate_loss(theta, theta_star, labels, cfg, false).value;
}

struct UnlearnResult {
  Matrix theta;
  std::vector<LossValue> loss_trace;  // epochs + 1 entries, initial first
  double wall_seconds = 0.0;
  double final_sigma = 0.0;
  UnlearnConfig config;
};

class UnlearnDivergence : public DivergenceError {
 public:
  UnlearnDivergence(int epoch, Matrix last_finite)
      : DivergenceError(str_cat("unlearn: non-finite loss at epoch ", epoch), epoch),
        last_finite_(std::move(last_finite)) {}
  const Matrix& last_finite_theta() const { return last_finite_; }

 private:
  Matrix last_finite_;
};

namespace detail {

inline AttributeTable subset_labels(const AttributeTable& labels, std::span<const Index> rows) {
  std::vector<Label> sub(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) sub[k] = labels.label(rows[k]);
  return AttributeTable::from_labels(std::move(sub));
}

// Rows for one mini-batch epoch, re-drawn until both groups are present.
inline std::vector<Index> sample_rows(const AttributeTable& labels, int batch, Rng& rng) {
  std::vector<Index> all(labels.size());
  std::iota(all.begin(), all.end(), Index{0});
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<Index> rows(all.begin(), all.begin() + batch);
    std::sort(rows.begin(), rows.end());
    bool seen[2] = {false, false};
    for (Index r : rows) seen[labels.label(r)] = true;
    if (seen[0] && seen[1]) return rows;
  }
  throw Error("unlearn: could not draw a mini-batch containing both groups");
}

}  // namespace detail

// Post-training unlearning: starting from theta_star, minimize
// l_u(theta) + alpha |theta - theta_star|^2 for cfg.epochs steps. With the
// median bandwidth, sigma is re-estimated from the current theta every epoch.
// theta_star is never modified.
inline UnlearnResult unlearn(const MatrixRef& theta_star, const AttributeTable& labels,
                             const UnlearnConfig& cfg) {
  cfg.validate();
  detail::check_labels(theta_star, labels, "unlearn");
  if (!theta_star.allFinite()) throw Error("unlearn: input embedding has non-finite entries");
  const bool mini_batch = cfg.batch_rows > 0 && cfg.batch_rows < static_cast<int>(labels.size());

  Stopwatch clock;
  UnlearnResult result;
  result.config = cfg;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  Matrix theta = theta_star;
  Matrix previous;
  Adam adam(theta.rows(), theta.cols(), AdamParams{cfg.learning_rate});
  Rng rng(cfg.seed);

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const bool step = epoch < cfg.epochs;
    LossEval eval = evaluate_loss(theta, theta_star, labels, cfg, step && !mini_batch);
    if (!std::isfinite(eval.value.total) || !theta.allFinite()) {
      throw UnlearnDivergence(epoch, epoch == 0 ? Matrix(theta_star) : previous);
    }
    result.loss_trace.push_back(eval.value);
    result.final_sigma = eval.sigma;
    if (!step) break;

    previous = theta;
    if (!mini_batch) {
      if (cfg.step_rule == StepRule::kAdam) {
        adam.step(theta, eval.grad);
      } else {
        theta -= cfg.learning_rate * eval.grad;
      }
      continue;
    }
    const auto rows = detail::sample_rows(labels, cfg.batch_rows, rng);
    Matrix sub(static_cast<Eigen::Index>(rows.size()), theta.cols());
    Matrix sub_star(sub.rows(), sub.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      sub.row(static_cast<Eigen::Index>(k)) = theta.row(rows[k]);
      sub_star.row(static_cast<Eigen::Index>(k)) = theta_star.row(rows[k]);
    }
    const Matrix sub_grad =
        evaluate_loss(sub, sub_star, detail::subset_labels(labels, rows), cfg, true).grad;
    Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) grad.row(rows[k]) = sub_grad.row(static_cast<Eigen::Index>(k));
    if (cfg.step_rule == StepRule::kAdam) {
      adam.step_rows(theta, grad, std::span<const Index>(rows));
    } else {
      theta -= cfg.learning_rate * grad;
    }
  }
  result.theta = std::move(theta);
  result.wall_seconds = clock.seconds();
  return result;
}

}  // namespace attrunlearn::unlearn
