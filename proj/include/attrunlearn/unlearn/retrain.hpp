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

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/recsys/lightgcn.hpp"
#include "attrunlearn/recsys/mf.hpp"
#include "attrunlearn/unlearn/losses.hpp"

namespace attrunlearn::unlearn {

struct RetrainResult {
  recsys::EmbeddingModel model;
  double wall_seconds = 0.0;
};

// In-training baseline: train the recommender from scratch with
// lambda * MMD^2(group 0, group 1) of the current user embeddings added to
// the recommendation loss at every optimizer step. The MMD term covers all
// users, not only those in the mini-batch. lambda = 0 reproduces the plain
// trainer exactly.
inline RetrainResult retrain_with_d2d(const InteractionDataset& ds, const AttributeTable& labels,
                                      recsys::ModelKind kind, const recsys::TrainConfig& cfg,
                                      double lambda, const Bandwidth& bandwidth = Bandwidth::median()) {
  if (!(lambda >= 0.0)) throw Error("retrain: lambda must be >= 0");
  if (static_cast<Index>(labels.size()) != ds.n_users) {
    throw ShapeError("retrain: attribute table does not match dataset");
  }
  labels.require_both_groups("retrain");
  recsys::UserPenalty penalty;
  if (lambda > 0.0) {
    penalty = [&labels, lambda, bandwidth](const Matrix& users, Matrix& grad) {
      MmdEval e = mmd_groups(users, labels, bandwidth, true);
      grad += lambda * e.grad;
      return lambda * e.value;
    };
  }
  Stopwatch clock;
  RetrainResult out;
  out.model = kind == recsys::ModelKind::kMF ? recsys::train_mf(ds, cfg, penalty)
                                             : recsys::train_lightgcn(ds, cfg, penalty);
  out.wall_seconds = clock.seconds();
  return out;
}

}  // namespace attrunlearn::unlearn
