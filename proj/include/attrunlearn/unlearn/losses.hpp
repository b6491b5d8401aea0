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

// Distinguishability and regularization terms of the unlearning objective.
//
// Group 0 and group 1 are the two attribute groups of an AttributeTable.
// U2U sums the squared embedding distance over every ordered pair of users
// with different labels, which equals 2 tr(theta^T L theta) for the Laplacian
// L of the complete bipartite "different label" graph. It is evaluated here
// in closed form from per-group sums, without an N x N matrix. D2D is the
// squared MMD between the two groups' embedding sets under one RBF kernel.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::unlearn {

inline double frobenius_reg(const MatrixRef& theta, const MatrixRef& theta_star) {
  require_same_shape(theta, theta_star, "frobenius_reg");
  return (theta - theta_star).squaredNorm();
}

namespace detail {

inline void check_labels(const MatrixRef& theta, const AttributeTable& labels,
                         std::string_view context) {
  if (static_cast<std::size_t>(theta.rows()) != labels.size()) {
    throw ShapeError(str_cat(context, ": ", theta.rows(), " embedding rows but ",
                             labels.size(), " labels"));
  }
  labels.require_both_groups(context);
}

struct GroupSums {
  double count[2] = {0.0, 0.0};
  double sq_norm[2] = {0.0, 0.0};
  Eigen::RowVectorXd sum[2];
};

inline GroupSums group_sums(const MatrixRef& theta, const AttributeTable& labels) {
  GroupSums s;
  for (int g = 0; g < 2; ++g) {
    s.sum[g] = Eigen::RowVectorXd::Zero(theta.cols());
    for (Index u : labels.group(static_cast<Label>(g))) {
      s.sum[g] += theta.row(u);
      s.sq_norm[g] += theta.row(u).squaredNorm();
    }
    s.count[g] = static_cast<double>(labels.group(static_cast<Label>(g)).size());
  }
  return s;
}

}  // namespace detail

// Direct double sum over all ordered pairs. O(N^2 K); reference only.
inline double u2u_loss_bruteforce(const MatrixRef& theta, const AttributeTable& labels) {
  detail::check_labels(theta, labels, "u2u_loss_bruteforce");
  double total = 0.0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    for (Eigen::Index j = 0; j < theta.rows(); ++j) {
      if (labels.label(static_cast<Index>(i)) != labels.label(static_cast<Index>(j))) {
        total += (theta.row(i) - theta.row(j)).squaredNorm();
      }
    }
  }
  return total;
}

inline double u2u_loss(const MatrixRef& theta, const AttributeTable& labels) {
  detail::check_labels(theta, labels, "u2u_loss");
  const auto s = detail::group_sums(theta, labels);
  const double value = 2.0 * (s.count[1] * s.sq_norm[0] + s.count[0] * s.sq_norm[1] -
                              2.0 * s.sum[0].dot(s.sum[1]));
  // Exact value is a sum of squares; cancellation can leave a tiny negative.
  return std::max(0.0, value);
}

// Row i of the gradient is 4 (n_other * theta_i - sum of the other group).
inline Matrix u2u_grad(const MatrixRef& theta, const AttributeTable& labels) {
  detail::check_labels(theta, labels, "u2u_grad");
  const auto s = detail::group_sums(theta, labels);
  Matrix grad(theta.rows(), theta.cols());
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const int other = 1 - labels.label(static_cast<Index>(i));
    grad.row(i) = 4.0 * (s.count[other] * theta.row(i) - s.sum[other]);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// MMD with an RBF kernel k(a, b) = exp(-|a - b|^2 / (2 sigma^2)).
// ---------------------------------------------------------------------------

struct Bandwidth {
  enum class Mode { kMedian, kFixed };
  Mode mode = Mode::kMedian;
  double sigma = 1.0;  // used in kFixed mode

  static Bandwidth median() { return {}; }
  static Bandwidth fixed(double sigma) { return {Mode::kFixed, sigma}; }
};

// Pairwise squared distances via the Gram matrix, clamped at zero.
inline Matrix squared_distances(const MatrixRef& points) {
  const Vector sq = points.rowwise().squaredNorm();
  Matrix d2(points.rows(), points.rows());
  d2.noalias() = -2.0 * (points * points.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  return d2;
}

namespace detail {

// The (k-1)-th and k-th smallest (0-based, k >= 1) upper-triangle entries of
// a symmetric matrix, exact.
// A strided sample brackets the target rank; one pass then counts entries
// below the bracket and collects those inside it. Falls back to a full
// selection when the bracket misses.
inline std::pair<double, double> upper_triangle_select(const Matrix& d2, std::size_t k) {
  const Eigen::Index n = d2.rows();
  const std::size_t total = static_cast<std::size_t>(n * (n - 1) / 2);
  thread_local std::vector<double> scratch;
  std::vector<double>& buf = scratch;
  buf.clear();
  if (total > 65536) {
    const std::size_t stride = total / 8192;
    std::size_t countdown = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* row = d2.row(i).data();
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (countdown == 0) {
          buf.push_back(row[j]);
          countdown = stride;
        }
        --countdown;
      }
    }
    const double q = static_cast<double>(k) / static_cast<double>(total);
    const auto quantile = [&](double frac) {
      const double clamped = std::clamp(frac, 0.0, 1.0);
      const auto it = buf.begin() + static_cast<std::ptrdiff_t>(
                                        clamped * static_cast<double>(buf.size() - 1));
      std::nth_element(buf.begin(), it, buf.end());
      return *it;
    };
    const double lo = quantile(q - 0.02 - 1.0 / static_cast<double>(total));
    const double hi = quantile(q + 0.02);
    // Branch-free compaction: about half the entries fall below lo, so a
    // conditional push mispredicts constantly.
    std::size_t below = 0;
    std::size_t kept = 0;
    buf.resize(total);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* row = d2.row(i).data();
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = row[j];
        below += static_cast<std::size_t>(v < lo);
        buf[kept] = v;
        kept += static_cast<std::size_t>((v >= lo) & (v <= hi));
      }
    }
    buf.resize(kept);
    if (k >= below + 1 && k - below < buf.size()) {
      const auto it = buf.begin() + static_cast<std::ptrdiff_t>(k - below);
      std::nth_element(buf.begin(), it, buf.end());
      return {*std::max_element(buf.begin(), it), *it};
    }
    buf.clear();
  }
  buf.reserve(total);
  for (Eigen::Index i = 0; i < n; ++i) {
    buf.insert(buf.end(), d2.row(i).data() + i + 1, d2.row(i).data() + n);
  }
  const auto it = buf.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(buf.begin(), it, buf.end());
  return {*std::max_element(buf.begin(), it), *it};
}

}  // namespace detail

// Median of the N(N-1)/2 pairwise Euclidean distances, selected on squared
// distances (same order).
inline double median_pairwise_distance(const Matrix& d2) {
  const Eigen::Index n = d2.rows();
  if (n < 2) throw Error("median heuristic needs at least two points");
  const std::size_t total = static_cast<std::size_t>(n * (n - 1) / 2);
  if (total == 1) return std::sqrt(d2(0, 1));
  const auto [lower, upper] = detail::upper_triangle_select(d2, total / 2);
  return total % 2 == 0 ? 0.5 * (std::sqrt(lower) + std::sqrt(upper)) : std::sqrt(upper);
}

inline double resolve_sigma(const Bandwidth& bw, const Matrix& d2) {
  if (bw.mode == Bandwidth::Mode::kFixed) {
    if (!(bw.sigma > 0.0) || !std::isfinite(bw.sigma)) throw Error("MMD bandwidth must be > 0");
    return bw.sigma;
  }
  const double sigma = median_pairwise_distance(d2);
  if (!(sigma > 0.0)) {
    throw Error("median-heuristic bandwidth is 0 (points coincide); use a fixed bandwidth");
  }
  return sigma;
}

struct MmdEval {
  double value = 0.0;
  double sigma = 0.0;
  Matrix grad;  // empty unless requested
};

// Biased (V-statistic) MMD^2 between the rows of group 0 and group 1:
//   mean k(X, X) + mean k(Y, Y) - 2 mean k(X, Y) = a^T K a,
// with a_i = 1/n0 on group 0 and -1/n1 on group 1. Its gradient is
//   d/d theta_i = -(2 a_i / sigma^2) sum_j a_j K_ij (theta_i - theta_j).
// The bandwidth is held constant for the derivative.
inline MmdEval mmd_groups(const MatrixRef& theta, const AttributeTable& labels,
                          const Bandwidth& bw, bool with_grad) {
  detail::check_labels(theta, labels, "mmd");
  const Eigen::Index n = theta.rows();
  Vector a(n);
  const double inv0 = 1.0 / static_cast<double>(labels.group(0).size());
  const double inv1 = 1.0 / static_cast<double>(labels.group(1).size());
  for (Eigen::Index i = 0; i < n; ++i) a[i] = labels.label(static_cast<Index>(i)) == 0 ? inv0 : -inv1;

  Matrix kernel = squared_distances(theta);
  MmdEval out;
  out.sigma = resolve_sigma(bw, kernel);
  const double inv_two_sigma2 = 1.0 / (2.0 * out.sigma * out.sigma);
  kernel = (kernel.array() * -inv_two_sigma2).exp().matrix();

  if (!with_grad) {
    out.value = std::max(0.0, a.dot(kernel * a));
    return out;
  }
  // One product for both K a and K (a o theta).
  Matrix rhs(n, theta.cols() + 1);
  rhs.col(0) = a;
  rhs.rightCols(theta.cols()) = a.asDiagonal() * theta;
  const Matrix prod = kernel * rhs;
  out.value = std::max(0.0, a.dot(prod.col(0)));
  const double scale = -2.0 / (out.sigma * out.sigma);
  out.grad = (scale * a.array()).matrix().asDiagonal() *
             (prod.col(0).asDiagonal() * theta - prod.rightCols(theta.cols()));
  return out;
}

namespace detail {

inline std::pair<Matrix, AttributeTable> stack_groups(const MatrixRef& x, const MatrixRef& y) {
  if (x.rows() < 1 || y.rows() < 1) throw Error("mmd: both sample sets must be non-empty");
  if (x.cols() != y.cols()) throw ShapeError("mmd: sample sets differ in width");
  Matrix stacked(x.rows() + y.rows(), x.cols());
  stacked << x, y;
  std::vector<Label> labels(static_cast<std::size_t>(stacked.rows()), 0);
  std::fill(labels.begin() + x.rows(), labels.end(), Label{1});
  return {std::move(stacked), AttributeTable::from_labels(std::move(labels))};
}

}  // namespace detail

inline double mmd_rbf(const MatrixRef& x, const MatrixRef& y, const Bandwidth& bw) {
  auto [stacked, labels] = detail::stack_groups(x, y);
  return mmd_groups(stacked, labels, bw, false).value;
}

inline double mmd_rbf(const MatrixRef& x, const MatrixRef& y, double sigma) {
  return mmd_rbf(x, y, Bandwidth::fixed(sigma));
}

// Gradients with respect to the rows of x and of y.
inline std::pair<Matrix, Matrix> mmd_grad(const MatrixRef& x, const MatrixRef& y,
                                          const Bandwidth& bw) {
  auto [stacked, labels] = detail::stack_groups(x, y);
  MmdEval e = mmd_groups(stacked, labels, bw, true);
  return {e.grad.topRows(x.rows()), e.grad.bottomRows(y.rows())};
}

inline std::pair<Matrix, Matrix> mmd_grad(const MatrixRef& x, const MatrixRef& y, double sigma) {
  return mmd_grad(x, y, Bandwidth::fixed(sigma));
}

}  // namespace attrunlearn::unlearn
