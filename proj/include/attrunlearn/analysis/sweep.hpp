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

#include <vector>

#include "attrunlearn/attack/attack.hpp"
#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/recsys/metrics.hpp"
#include "attrunlearn/unlearn/unlearn.hpp"

namespace attrunlearn::analysis {

struct SweepRow {
  double alpha = 0.0;
  double auc_mlp = 0.0;
  double auc_gbt = 0.0;
  double ndcg10 = 0.0;
  double hr10 = 0.0;
  double frob_dist = 0.0;  // |theta_new - theta_star|_F
  double wall_seconds = 0.0;
};

struct SweepConfig {
  unlearn::UnlearnConfig unlearn = unlearn::UnlearnConfig::defaults(unlearn::LossKind::kD2DR);
  attack::AttackerConfig attack;
  int threads = 1;
};

// One unlearn + attack + ranking evaluation per alpha, each on its own copy
// of theta_star. Rows come back in grid order whatever the thread count.
inline std::vector<SweepRow> alpha_sweep(const MatrixRef& theta_star, const AttributeTable& labels,
                                         const InteractionDataset& ds,
                                         const recsys::EmbeddingModel& model,
                                         const std::vector<double>& grid,
                                         const SweepConfig& cfg) {
  if (grid.empty()) throw Error("alpha_sweep: empty alpha grid");
  for (double a : grid) {
    if (!(a >= 0.0)) throw Error(str_cat("alpha_sweep: invalid alpha ", a));
  }
  std::vector<SweepRow> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), cfg.threads, [&](int i) {
    unlearn::UnlearnConfig uc = cfg.unlearn;
    uc.alpha = grid[static_cast<std::size_t>(i)];
    const auto result = unlearn::unlearn(theta_star, labels, uc);
    const auto attacks = attack::run_attacks(result.theta, labels, cfg.attack);
    const auto rec = recsys::eval_ranking(recsys::replace_user_embedding(model, result.theta), ds,
                                          {10});
    SweepRow& row = rows[static_cast<std::size_t>(i)];
    row.alpha = uc.alpha;
    row.auc_mlp = attacks.mlp.auc;
    row.auc_gbt = attacks.gbt.auc;
    row.ndcg10 = rec.ndcg.at(10);
    row.hr10 = rec.hr.at(10);
    row.frob_dist = (result.theta - theta_star).norm();
    row.wall_seconds = result.wall_seconds;
  });
  return rows;
}

}  // namespace attrunlearn::analysis
