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
#include <functional>
#include <cmath>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::recsys {

// Extra objective on the (scoring) user embedding matrix, evaluated at every
// optimizer step of a trainer. Adds its gradient into `grad` and returns its
// value.
using UserPenalty = std::function<double(const Matrix& users, Matrix& grad)>;

struct Positive {
  Index user;
  Index item;
};

// Unique (user, item) train pairs in user-major, item-ascending order.
inline std::vector<Positive> train_positives(const std::vector<std::vector<Index>>& train_items) {
  std::vector<Positive> out;
  for (std::size_t u = 0; u < train_items.size(); ++u) {
    for (Index i : train_items[u]) out.push_back({static_cast<Index>(u), i});
  }
  return out;
}

// Uniform negatives over items the user has no train interaction with.
class NegativeSampler {
 public:
  NegativeSampler(const std::vector<std::vector<Index>>& train_items, Index n_items)
      : train_items_(train_items), pick_(0, n_items - 1) {
    for (std::size_t u = 0; u < train_items.size(); ++u) {
      if (static_cast<Index>(train_items[u].size()) >= n_items) {
        throw Error(str_cat("user ", u, " interacted with every item; no negatives exist"));
      }
    }
  }

  Index sample(Index user, Rng& rng) {
    const auto& seen = train_items_[static_cast<std::size_t>(user)];
    while (true) {
      Index j = pick_(rng);
      if (!std::binary_search(seen.begin(), seen.end(), j)) return j;
    }
  }

 private:
  const std::vector<std::vector<Index>>& train_items_;
  std::uniform_int_distribution<Index> pick_;
};

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev > 0.0 ? normal(rng) : 0.0;
  }
  return m;
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Remembers which rows of a gradient buffer were written so the optimizer
// can update and clear only those.
class TouchedRows {
 public:
  explicit TouchedRows(Index n) : flag_(static_cast<std::size_t>(n), 0) {}

  void mark(Index r) {
    if (!flag_[static_cast<std::size_t>(r)]) {
      flag_[static_cast<std::size_t>(r)] = 1;
      rows_.push_back(r);
    }
  }
  void mark_all() {
    for (Index r = 0; r < static_cast<Index>(flag_.size()); ++r) mark(r);
  }
  // Sorted so updates happen in a fixed order.
  std::span<const Index> rows() {
    std::sort(rows_.begin(), rows_.end());
    return rows_;
  }
  void clear(Matrix& grad) {
    for (Index r : rows_) {
      grad.row(r).setZero();
      flag_[static_cast<std::size_t>(r)] = 0;
    }
    rows_.clear();
  }

 private:
  std::vector<char> flag_;
  std::vector<Index> rows_;
};

}  // namespace attrunlearn::recsys
