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
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/optim.hpp"
#include "attrunlearn/recsys/model.hpp"
#include "attrunlearn/recsys/sampling.hpp"

namespace attrunlearn::recsys {

// Matrix-factorization core: score(u, i) = <p_u, q_i>, trained with binary
// cross-entropy on train positives plus `negatives` uniformly sampled
// negatives each, mini-batched by positives, Adam updates on the touched
// embedding rows. When `penalty` is set it is added to every step's loss,
// which makes every user row part of each update.
inline EmbeddingModel train_mf(const InteractionDataset& ds, const TrainConfig& cfg,
                               const UserPenalty& penalty = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  EmbeddingModel model;
  model.kind = ModelKind::kMF;
  model.config = cfg;
  model.user_emb = gaussian_matrix(ds.n_users, cfg.embedding_dim, cfg.init_std, rng);
  model.item_emb = gaussian_matrix(ds.n_items, cfg.embedding_dim, cfg.init_std, rng);
  if (cfg.epochs == 0) return model;

  const auto train_items = items_by_user(ds, Split::kTrain);
  auto positives = train_positives(train_items);
  if (positives.empty()) throw Error("train_mf: dataset has no train interactions");
  NegativeSampler sampler(train_items, ds.n_items);

  const AdamParams adam{cfg.learning_rate};
  Adam user_opt(ds.n_users, cfg.embedding_dim, adam);
  Adam item_opt(ds.n_items, cfg.embedding_dim, adam);
  Matrix user_grad = Matrix::Zero(ds.n_users, cfg.embedding_dim);
  Matrix item_grad = Matrix::Zero(ds.n_items, cfg.embedding_dim);
  TouchedRows user_rows(ds.n_users), item_rows(ds.n_items);

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const double per_positive = 1.0 + cfg.negatives;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < positives.size(); start += batch) {
      const std::size_t end = std::min(positives.size(), start + batch);
      const double n_samples = static_cast<double>(end - start) * per_positive;
      double loss = 0.0;
      auto accumulate = [&](Index u, Index i, double label) {
        const double s = model.user_emb.row(u).dot(model.item_emb.row(i));
        loss += label > 0.5 ? softplus(-s) : softplus(s);
        const double g = (sigmoid(s) - label) / n_samples;
        user_grad.row(u) += g * model.item_emb.row(i);
        item_grad.row(i) += g * model.user_emb.row(u);
        user_rows.mark(u);
        item_rows.mark(i);
      };
      for (std::size_t p = start; p < end; ++p) {
        const auto [u, i] = positives[p];
        accumulate(u, i, 1.0);
        for (int n = 0; n < cfg.negatives; ++n) accumulate(u, sampler.sample(u, rng), 0.0);
      }
      loss /= n_samples;
      if (penalty) {
        loss += penalty(model.user_emb, user_grad);
        user_rows.mark_all();
      }
      if (!std::isfinite(loss)) {
        throw DivergenceError(str_cat("train_mf: non-finite loss at epoch ", epoch), epoch);
      }
      user_opt.step_rows(model.user_emb, user_grad, user_rows.rows());
      item_opt.step_rows(model.item_emb, item_grad, item_rows.rows());
      user_rows.clear(user_grad);
      item_rows.clear(item_grad);
      epoch_loss += loss;
    }
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError(str_cat("train_mf: non-finite loss at epoch ", epoch), epoch);
    }
    model.epochs_trained = epoch;
  }
  return model;
}

}  // namespace attrunlearn::recsys
