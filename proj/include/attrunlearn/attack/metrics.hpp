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
#include <span>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::attack {

struct AttackReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double auc = 0.0;
};

// Area under the ROC curve via the Mann-Whitney rank statistic with average
// ranks for ties, so a tied (positive, negative) pair counts 1/2.
inline double auc_rank(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(start + 1 + end);  // 1-based
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    }
    start = end;
  }
  for (Label l : labels) positives += l == 1 ? 1.0 : 0.0;
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw Error("auc: both classes must be present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

// Positive class is label 1. A score strictly above `threshold` predicts 1.
// Precision with no positive predictions is reported as 0.
inline AttackReport evaluate_attack(std::span<const double> scores, std::span<const Label> labels,
                                    double threshold = 0.5) {
  if (scores.size() != labels.size()) throw ShapeError("evaluate_attack: length mismatch");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  if (tp + fn == 0 || tn + fp == 0) {
    throw Error("evaluate_attack: held-out labels must contain both classes");
  }
  AttackReport r;
  r.accuracy = (tp + tn) / static_cast<double>(scores.size());
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp / (tp + fn);
  r.auc = auc_rank(scores, labels);
  return r;
}

}  // namespace attrunlearn::attack
