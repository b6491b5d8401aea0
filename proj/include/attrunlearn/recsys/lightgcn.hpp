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

#include <Eigen/SparseCore>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/optim.hpp"
#include "attrunlearn/recsys/model.hpp"
#include "attrunlearn/recsys/sampling.hpp"

namespace attrunlearn::recsys {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric degree-normalized adjacency D^-1/2 A D^-1/2 of the user-item
// bipartite graph. Users occupy rows [0, N), items rows [N, N + M). Every
// node must have at least one train edge.
inline SparseMatrix normalized_adjacency(const std::vector<std::vector<Index>>& train_items,
                                         Index n_items) {
  const Index n_users = static_cast<Index>(train_items.size());
  const Index n = n_users + n_items;
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  std::size_t edges = 0;
  for (Index u = 0; u < n_users; ++u) {
    for (Index i : train_items[static_cast<std::size_t>(u)]) {
      degree[static_cast<std::size_t>(u)] += 1.0;
      degree[static_cast<std::size_t>(n_users + i)] += 1.0;
      ++edges;
    }
  }
  for (Index v = 0; v < n; ++v) {
    if (degree[static_cast<std::size_t>(v)] == 0.0) {
      throw Error(v < n_users
                      ? str_cat("normalized_adjacency: user ", v, " has no train edge")
                      : str_cat("normalized_adjacency: item ", v - n_users, " has no train edge"));
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges);
  for (Index u = 0; u < n_users; ++u) {
    for (Index i : train_items[static_cast<std::size_t>(u)]) {
      const Index v = n_users + i;
      const double w = 1.0 / std::sqrt(degree[static_cast<std::size_t>(u)] *
                                       degree[static_cast<std::size_t>(v)]);
      triplets.emplace_back(u, v, w);
      triplets.emplace_back(v, u, w);
    }
  }
  SparseMatrix adj(n, n);
  adj.setFromTriplets(triplets.begin(), triplets.end());
  return adj;
}

inline SparseMatrix normalized_adjacency(const InteractionDataset& ds) {
  return normalized_adjacency(items_by_user(ds, Split::kTrain), ds.n_items);
}

// Mean of E, AE, ..., A^L E. Linear in E; with layers = 0 it is E itself.
inline Matrix propagate(const SparseMatrix& adj, const Matrix& base, int layers) {
  Matrix sum = base;
  Matrix current = base;
  for (int l = 0; l < layers; ++l) {
    Matrix next = adj * current;
    current.swap(next);
    sum += current;
  }
  return sum / static_cast<double>(layers + 1);
}

inline void set_final_embeddings(EmbeddingModel& model, const SparseMatrix& adj) {
  Matrix base(model.base_user.rows() + model.base_item.rows(), model.base_user.cols());
  base << model.base_user, model.base_item;
  Matrix final_emb = propagate(adj, base, model.layers);
  model.user_emb = final_emb.topRows(model.base_user.rows());
  model.item_emb = final_emb.bottomRows(model.base_item.rows());
}

// BPR term softplus(-<u, pos - neg>) for one triple and its gradients.
struct BprTerm {
  double loss = 0.0;
  Eigen::RowVectorXd d_user, d_pos, d_neg;
};

template <typename A, typename B, typename C>
BprTerm bpr_term(const A& user, const B& pos, const C& neg) {
  BprTerm t;
  const Eigen::RowVectorXd diff = pos - neg;
  const double x = user.dot(diff);
  const double w = -sigmoid(-x);
  t.loss = softplus(-x);
  t.d_user = w * diff;
  t.d_pos = w * user;
  t.d_neg = -w * user;
  return t;
}

// LightGCN trained with the BPR loss on (user, positive, negative) triples.
// Each step propagates the full graph, computes gradients with respect to
// the final embeddings of the batch, and pulls them back to layer 0 through
// the same (symmetric) propagation. `penalty` acts on the final user
// embeddings.
inline EmbeddingModel train_lightgcn(const InteractionDataset& ds, const TrainConfig& cfg,
                                     const UserPenalty& penalty = {}) {
  cfg.validate();
  const auto train_items = items_by_user(ds, Split::kTrain);
  const SparseMatrix adj = normalized_adjacency(train_items, ds.n_items);

  Rng rng(cfg.seed);
  EmbeddingModel model;
  model.kind = ModelKind::kLightGCN;
  model.config = cfg;
  model.layers = cfg.layers;
  const Index n_users = ds.n_users;
  const Index n_nodes = ds.n_users + ds.n_items;
  Matrix base(n_nodes, cfg.embedding_dim);
  base.topRows(n_users) = gaussian_matrix(n_users, cfg.embedding_dim, cfg.init_std, rng);
  base.bottomRows(ds.n_items) = gaussian_matrix(ds.n_items, cfg.embedding_dim, cfg.init_std, rng);

  auto positives = train_positives(train_items);
  if (positives.empty()) throw Error("train_lightgcn: dataset has no train interactions");
  NegativeSampler sampler(train_items, ds.n_items);
  Adam opt(n_nodes, cfg.embedding_dim, AdamParams{cfg.learning_rate});
  Matrix grad = Matrix::Zero(n_nodes, cfg.embedding_dim);
  Matrix user_grad = Matrix::Zero(n_users, cfg.embedding_dim);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    for (std::size_t start = 0; start < positives.size(); start += batch) {
      const std::size_t end = std::min(positives.size(), start + batch);
      const double n_triples = static_cast<double>(end - start) * cfg.negatives;
      Matrix emb = propagate(adj, base, cfg.layers);
      grad.setZero();
      double loss = 0.0;
      for (std::size_t p = start; p < end; ++p) {
        const auto [u, i] = positives[p];
        const Index pi = n_users + i;
        for (int n = 0; n < cfg.negatives; ++n) {
          const Index nj = n_users + sampler.sample(u, rng);
          const BprTerm t = bpr_term(emb.row(u), emb.row(pi), emb.row(nj));
          loss += t.loss;
          grad.row(u) += t.d_user / n_triples;
          grad.row(pi) += t.d_pos / n_triples;
          grad.row(nj) += t.d_neg / n_triples;
        }
      }
      loss /= n_triples;
      if (penalty) {
        user_grad.setZero();
        loss += penalty(Matrix(emb.topRows(n_users)), user_grad);
        grad.topRows(n_users) += user_grad;
      }
      if (!std::isfinite(loss)) {
        throw DivergenceError(str_cat("train_lightgcn: non-finite loss at epoch ", epoch), epoch);
      }
      // The propagation operator is self-adjoint, so the pullback is the
      // same layer average applied to the gradient.
      opt.step(base, propagate(adj, grad, cfg.layers));
    }
    model.epochs_trained = epoch;
  }
  model.base_user = base.topRows(n_users);
  model.base_item = base.bottomRows(ds.n_items);
  set_final_embeddings(model, adj);
  return model;
}

}  // namespace attrunlearn::recsys
