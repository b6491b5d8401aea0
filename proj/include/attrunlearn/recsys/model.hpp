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
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::recsys {

enum class ModelKind : std::uint32_t { kMF = 0, kLightGCN = 1 };

inline std::string to_string(ModelKind kind) {
  return kind == ModelKind::kMF ? "mf" : "lightgcn";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "mf" || s == "nmf") return ModelKind::kMF;
  if (s == "lightgcn") return ModelKind::kLightGCN;
  throw Error(str_cat("unknown model kind '", s, "'"));
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 256;   // positives per optimizer step
  int negatives = 4;      // sampled negatives per positive
  double init_std = 0.01;
  int embedding_dim = 16;
  int layers = 3;         // LightGCN propagation depth
  std::uint64_t seed = 0;

  static TrainConfig defaults(ModelKind kind) {
    TrainConfig c;
    if (kind == ModelKind::kLightGCN) {
      c.epochs = 400;
      c.batch_size = 2048;
      c.negatives = 1;
    }
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be > 0");
    if (epochs < 0) throw Error("train: epochs must be >= 0");
    if (batch_size < 1) throw Error("train: batch_size must be >= 1");
    if (negatives < 1) throw Error("train: negatives must be >= 1");
    if (!(init_std >= 0.0)) throw Error("train: init_std must be >= 0");
    if (embedding_dim < 1) throw Error("train: embedding_dim must be >= 1");
    if (layers < 0) throw Error("train: layers must be >= 0");
  }
};

// Trained collaborative-filtering model. `user_emb` and `item_emb` are the
// embeddings used for scoring: for MF they are the parameters themselves,
// for LightGCN the layer-averaged propagated embeddings. LightGCN keeps its
// layer-0 parameters in `base_user` / `base_item`.
struct EmbeddingModel {
  ModelKind kind = ModelKind::kMF;
  Matrix user_emb;
  Matrix item_emb;
  int layers = 0;
  Matrix base_user;
  Matrix base_item;
  TrainConfig config;
  int epochs_trained = 0;

  Index n_users() const { return static_cast<Index>(user_emb.rows()); }
  Index n_items() const { return static_cast<Index>(item_emb.rows()); }
  int dim() const { return static_cast<int>(user_emb.cols()); }
};

// The matrix that attacks and unlearning operate on.
inline const Matrix& user_embedding(const EmbeddingModel& model) { return model.user_emb; }

inline EmbeddingModel replace_user_embedding(EmbeddingModel model, const MatrixRef& theta) {
  require_same_shape(model.user_emb, theta, "replace_user_embedding");
  if (!theta.allFinite()) throw Error("replace_user_embedding: non-finite entries");
  model.user_emb = theta;
  return model;
}

inline Vector score_items(const EmbeddingModel& model, Index user) {
  return model.item_emb * model.user_emb.row(user).transpose();
}

// Top-k by descending score over items not in `exclude` (sorted ascending).
// Equal scores are ordered by ascending item index. Returns fewer than k
// items when fewer candidates exist.
inline std::vector<Index> top_k(const Vector& scores, int k,
                                std::span<const Index> exclude = {}) {
  if (k < 1) throw Error("top_k: k must be >= 1");
  std::vector<Index> cand;
  cand.reserve(static_cast<std::size_t>(scores.size()));
  auto ex = exclude.begin();
  for (Index i = 0; i < static_cast<Index>(scores.size()); ++i) {
    while (ex != exclude.end() && *ex < i) ++ex;
    if (ex != exclude.end() && *ex == i) continue;
    cand.push_back(i);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
  auto better = [&scores](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take),
                    cand.end(), better);
  cand.resize(take);
  return cand;
}

inline std::vector<Index> recommend_topk(const EmbeddingModel& model, Index user, int k,
                                         std::span<const Index> exclude = {}) {
  return top_k(score_items(model, user), k, exclude);
}

}  // namespace attrunlearn::recsys
