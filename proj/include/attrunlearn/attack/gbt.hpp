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

// Gradient-boosted regression trees on the logistic loss, grown depth-wise
// with exact greedy split search. Each round fits a tree to the first and
// second derivatives of the loss at the current margins; leaves take the
// regularized Newton step -G / (H + lambda), scaled by the shrinkage.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/attack/shadow.hpp"

namespace attrunlearn::attack {

struct GbtConfig {
  int rounds = 100;
  int max_depth = 6;
  double shrinkage = 0.3;
  double lambda = 1.0;            // L2 on leaf weights
  double gamma = 0.0;             // minimum gain to split
  double min_child_weight = 1.0;  // minimum hessian sum per child
  std::uint64_t seed = 0;         // the exact learner is deterministic; kept for reports
};

// Splits whose gain does not exceed this are treated as no improvement.
inline constexpr double kMinSplitGain = 1e-6;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(at)];
      at = x(n.feature) < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }

  int depth() const { return depth_from(0); }

 private:
  int depth_from(int at) const {
    const auto& n = nodes[static_cast<std::size_t>(at)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Structure score improvement of a split, without the conventional 1/2:
//   G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda) - gamma.
inline double split_gain(double gl, double hl, double gr, double hr, const GbtConfig& cfg) {
  const double g = gl + gr;
  const double h = hl + hr;
  return gl * gl / (hl + cfg.lambda) + gr * gr / (hr + cfg.lambda) - g * g / (h + cfg.lambda) -
         cfg.gamma;
}

// Best split of `rows` over all features. Thresholds sit halfway between
// adjacent distinct values; rows with x < threshold go left. Ties keep the
// lowest feature, then the lowest threshold. Returns feature = -1 when no
// split has gain above kMinSplitGain.
inline SplitCandidate find_best_split(const MatrixRef& x, std::span<const double> grad,
                                      std::span<const double> hess, std::span<const Index> rows,
                                      const GbtConfig& cfg) {
  SplitCandidate best;
  best.gain = kMinSplitGain;
  double g_total = 0.0, h_total = 0.0;
  for (Index r : rows) {
    g_total += grad[static_cast<std::size_t>(r)];
    h_total += hess[static_cast<std::size_t>(r)];
  }
  std::vector<Index> sorted(rows.begin(), rows.end());
  for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&x, f](Index a, Index b) { return x(a, f) < x(b, f); });
    double gl = 0.0, hl = 0.0;
    for (std::size_t p = 0; p + 1 < sorted.size(); ++p) {
      gl += grad[static_cast<std::size_t>(sorted[p])];
      hl += hess[static_cast<std::size_t>(sorted[p])];
      const double lo = x(sorted[p], f);
      const double hi = x(sorted[p + 1], f);
      if (!(lo < hi)) continue;
      const double hr = h_total - hl;
      if (hl < cfg.min_child_weight || hr < cfg.min_child_weight) continue;
      const double gain = split_gain(gl, hl, g_total - gl, hr, cfg);
      if (gain > best.gain) {
        best.feature = f;
        best.threshold = lo + 0.5 * (hi - lo);
        best.gain = gain;
      }
    }
  }
  if (best.feature < 0) best.gain = 0.0;
  return best;
}

inline double leaf_weight(double g, double h, const GbtConfig& cfg) { return -g / (h + cfg.lambda); }

struct GbtClassifier {
  double base_margin = 0.0;  // prior log-odds
  std::vector<RegressionTree> trees;
  int n_features = 0;

  double margin(const auto& row) const {
    double m = base_margin;
    for (const auto& t : trees) m += t.predict(row);
    return m;
  }

  std::vector<double> predict_proba(const MatrixRef& x) const {
    if (x.cols() != n_features) {
      throw ShapeError(str_cat("gbt: expected ", n_features, " features, got ", x.cols()));
    }
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      out[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(-margin(x.row(r))));
    }
    return out;
  }
};

namespace detail {

inline int grow(RegressionTree& tree, const MatrixRef& x, std::span<const double> grad,
                std::span<const double> hess, std::vector<Index> rows, int depth,
                const GbtConfig& cfg) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  double g = 0.0, h = 0.0;
  for (Index r : rows) {
    g += grad[static_cast<std::size_t>(r)];
    h += hess[static_cast<std::size_t>(r)];
  }
  SplitCandidate split;
  if (depth < cfg.max_depth && rows.size() >= 2) split = find_best_split(x, grad, hess, rows, cfg);
  if (split.feature < 0) {
    tree.nodes[static_cast<std::size_t>(id)].value = cfg.shrinkage * leaf_weight(g, h, cfg);
    return id;
  }
  std::vector<Index> left, right;
  for (Index r : rows) (x(r, split.feature) < split.threshold ? left : right).push_back(r);
  rows.clear();
  rows.shrink_to_fit();
  const int l = grow(tree, x, grad, hess, std::move(left), depth + 1, cfg);
  const int r = grow(tree, x, grad, hess, std::move(right), depth + 1, cfg);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.left = l;
  node.right = r;
  return id;
}

}  // namespace detail

inline GbtClassifier train_gbt_attacker(const MatrixRef& x, std::span<const Label> y,
                                        const GbtConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("gbt: rows and labels differ");
  detail::require_two_per_class(y, "gbt");
  if (cfg.rounds < 0 || cfg.max_depth < 0) throw Error("gbt: rounds and max_depth must be >= 0");
  const auto n = static_cast<std::size_t>(x.rows());
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), Label{1}));
  const double prior = positives / static_cast<double>(n);

  GbtClassifier model;
  model.n_features = static_cast<int>(x.cols());
  model.base_margin = std::log(prior / (1.0 - prior));
  std::vector<double> margin(n, model.base_margin), grad(n), hess(n);
  std::vector<Index> all(n);
  std::iota(all.begin(), all.end(), Index{0});
  for (int round = 0; round < cfg.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margin[i]));
      grad[i] = p - static_cast<double>(y[i]);
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    RegressionTree tree;
    detail::grow(tree, x, grad, hess, all, 0, cfg);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(x.row(static_cast<Eigen::Index>(i)));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace attrunlearn::attack
