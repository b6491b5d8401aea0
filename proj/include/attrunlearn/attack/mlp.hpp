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
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/optim.hpp"
#include "attrunlearn/attack/shadow.hpp"

namespace attrunlearn::attack {

struct MlpConfig {
  int hidden = 100;
  double l2 = 1.0;            // penalty 0.5 * l2 * |W|^2 / batch size
  int max_iterations = 1000;  // epochs
  double learning_rate = 1e-3;
  int batch_size = 200;       // capped at the number of samples
  double tolerance = 1e-4;
  int patience = 10;
  std::uint64_t seed = 0;
};

// One hidden rectifier layer and a two-way softmax output.
struct MlpClassifier {
  Matrix w1;  // K x H
  Matrix b1;  // 1 x H
  Matrix w2;  // H x 2
  Matrix b2;  // 1 x 2
  int iterations = 0;
  double final_loss = 0.0;

  static MlpClassifier zeros(int inputs, int hidden) {
    MlpClassifier m;
    m.w1 = Matrix::Zero(inputs, hidden);
    m.b1 = Matrix::Zero(1, hidden);
    m.w2 = Matrix::Zero(hidden, 2);
    m.b2 = Matrix::Zero(1, 2);
    return m;
  }

  int inputs() const { return static_cast<int>(w1.rows()); }

  Matrix hidden_activations(const MatrixRef& x) const {
    Matrix z = x * w1;
    z.rowwise() += b1.row(0);
    return z.cwiseMax(0.0);
  }

  // Row-wise softmax probabilities, n x 2.
  Matrix probabilities(const MatrixRef& x) const {
    Matrix logits = hidden_activations(x) * w2;
    logits.rowwise() += b2.row(0);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - mx).exp().matrix();
      logits.row(r) /= logits.row(r).sum();
    }
    return logits;
  }

  std::vector<double> predict_proba(const MatrixRef& x) const {
    if (x.cols() != w1.rows()) {
      throw ShapeError(str_cat("mlp: expected ", w1.rows(), " features, got ", x.cols()));
    }
    const Matrix p = probabilities(x);
    std::vector<double> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = p(r, 1);
    return out;
  }
};

namespace detail {

inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

}  // namespace detail

// Mini-batch Adam on mean cross-entropy plus the L2 penalty. Training stops
// after max_iterations epochs, or once the epoch loss has failed to improve
// on the best loss by more than `tolerance` for more than `patience`
// consecutive epochs.
inline MlpClassifier train_mlp_attacker(const MatrixRef& x, std::span<const Label> y,
                                        const MlpConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("mlp: rows and labels differ");
  detail::require_two_per_class(y, "mlp");
  if (cfg.hidden < 1 || cfg.max_iterations < 1 || cfg.batch_size < 1) {
    throw Error("mlp: hidden, max_iterations and batch_size must be >= 1");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  Rng rng(cfg.seed);
  MlpClassifier m;
  const double bound1 = std::sqrt(6.0 / static_cast<double>(k + cfg.hidden));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(cfg.hidden + 2));
  m.w1 = detail::glorot_uniform(k, cfg.hidden, bound1, rng);
  m.b1 = detail::glorot_uniform(1, cfg.hidden, bound1, rng);
  m.w2 = detail::glorot_uniform(cfg.hidden, 2, bound2, rng);
  m.b2 = detail::glorot_uniform(1, 2, bound2, rng);

  const AdamParams adam{cfg.learning_rate};
  Adam opt_w1(k, cfg.hidden, adam), opt_b1(1, cfg.hidden, adam);
  Adam opt_w2(cfg.hidden, 2, adam), opt_b2(1, 2, adam);

  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  double best_loss = std::numeric_limits<double>::infinity();
  int no_improvement = 0;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    std::shuffle(order.begin(), order.end(), rng);
    double accumulated = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index end = std::min(n, start + batch);
      const Eigen::Index nb = end - start;
      Matrix xb(nb, k);
      Matrix target = Matrix::Zero(nb, 2);
      for (Eigen::Index r = 0; r < nb; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = x.row(src);
        target(r, y[static_cast<std::size_t>(src)]) = 1.0;
      }
      Matrix z1 = xb * m.w1;
      z1.rowwise() += m.b1.row(0);
      const Matrix a1 = z1.cwiseMax(0.0);
      const Matrix p = m.probabilities(xb);

      double ce = 0.0;
      for (Eigen::Index r = 0; r < nb; ++r) {
        const double pr = std::clamp((p.array() * target.array()).row(r).sum(), 1e-15, 1.0);
        ce -= std::log(pr);
      }
      const double inv_nb = 1.0 / static_cast<double>(nb);
      const double loss = ce * inv_nb +
                          0.5 * cfg.l2 * (m.w1.squaredNorm() + m.w2.squaredNorm()) * inv_nb;
      if (!std::isfinite(loss)) throw DivergenceError(str_cat("mlp: non-finite loss at iteration ", it), it);
      accumulated += loss * static_cast<double>(nb);

      const Matrix dz2 = (p - target) * inv_nb;
      const Matrix gw2 = a1.transpose() * dz2 + cfg.l2 * inv_nb * m.w2;
      const Matrix gb2 = dz2.colwise().sum();
      const Matrix dz1 = ((dz2 * m.w2.transpose()).array() * (z1.array() > 0.0).cast<double>()).matrix();
      const Matrix gw1 = xb.transpose() * dz1 + cfg.l2 * inv_nb * m.w1;
      const Matrix gb1 = dz1.colwise().sum();
      opt_w1.step(m.w1, gw1);
      opt_b1.step(m.b1, gb1);
      opt_w2.step(m.w2, gw2);
      opt_b2.step(m.b2, gb2);
    }
    const double epoch_loss = accumulated / static_cast<double>(n);
    m.iterations = it;
    m.final_loss = epoch_loss;
    if (epoch_loss > best_loss - cfg.tolerance) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (no_improvement > cfg.patience) break;
  }
  return m;
}

}  // namespace attrunlearn::attack
