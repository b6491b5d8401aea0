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
#include <map>
#include <span>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/recsys/model.hpp"

namespace attrunlearn::recsys {

struct RecReport {
  std::map<int, double> ndcg;
  std::map<int, double> hr;
  Index users_evaluated = 0;
};

struct RankingScore {
  double hr = 0.0;
  double ndcg = 0.0;
};

// Metrics of one ranked list against a relevant set (sorted ascending).
// HR@k is the fraction of relevant items that appear in the top k; NDCG@k
// uses binary gains and log2 discounts, normalized by the ideal DCG of
// min(k, |relevant|) hits.
inline RankingScore ranking_metrics(std::span<const Index> ranked,
                                    std::span<const Index> relevant, int k) {
  RankingScore out;
  if (relevant.empty()) return out;
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  double dcg = 0.0;
  int hits = 0;
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[pos])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  out.hr = static_cast<double>(hits) / static_cast<double>(relevant.size());
  out.ndcg = dcg / idcg;
  return out;
}

// Full-catalog ranking protocol: for every user with at least one item in
// `target`, rank all items except the user's train items by `scorer(user)`
// and average the per-user metrics.
template <typename Scorer>
RecReport eval_ranking_by(const InteractionDataset& ds, Scorer&& scorer,
                          std::vector<int> cutoffs = {5, 10}, Split target = Split::kTest) {
  if (cutoffs.empty()) throw Error("eval_ranking: no cutoffs");
  const int max_k = *std::max_element(cutoffs.begin(), cutoffs.end());
  const auto train = items_by_user(ds, Split::kTrain);
  const auto relevant = items_by_user(ds, target);
  RecReport report;
  for (int k : cutoffs) {
    report.ndcg[k] = 0.0;
    report.hr[k] = 0.0;
  }
  for (Index u = 0; u < ds.n_users; ++u) {
    const auto& rel = relevant[static_cast<std::size_t>(u)];
    if (rel.empty()) continue;
    const Vector scores = scorer(u);
    const auto ranked = top_k(scores, max_k, train[static_cast<std::size_t>(u)]);
    for (int k : cutoffs) {
      const RankingScore s = ranking_metrics(ranked, rel, k);
      report.ndcg[k] += s.ndcg;
      report.hr[k] += s.hr;
    }
    ++report.users_evaluated;
  }
  if (report.users_evaluated > 0) {
    for (int k : cutoffs) {
      report.ndcg[k] /= report.users_evaluated;
      report.hr[k] /= report.users_evaluated;
    }
  }
  return report;
}

inline RecReport eval_ranking(const EmbeddingModel& model, const InteractionDataset& ds,
                              std::vector<int> cutoffs = {5, 10}, Split target = Split::kTest) {
  if (model.n_users() != ds.n_users || model.n_items() != ds.n_items) {
    throw ShapeError("eval_ranking: model does not match dataset");
  }
  return eval_ranking_by(
      ds, [&model](Index u) { return score_items(model, u); }, std::move(cutoffs), target);
}

// Non-personalized baseline: items ranked by their train interaction count.
inline RecReport eval_popularity(const InteractionDataset& ds, std::vector<int> cutoffs = {5, 10},
                                 Split target = Split::kTest) {
  Vector counts = Vector::Zero(ds.n_items);
  for (const auto& r : ds.interactions) {
    if (r.split == Split::kTrain) counts[r.item] += 1.0;
  }
  return eval_ranking_by(
      ds, [&counts](Index) { return counts; }, std::move(cutoffs), target);
}

}  // namespace attrunlearn::recsys
