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

// Binary embedding checkpoint, version 1. All integers are unsigned
// little-endian, reals are IEEE-754 binary64 little-endian.
//
//   offset  size  field
//   0       8     magic "AUEMBCK1"
//   8       4     version (1)
//   12      4     kind (0 = MF, 1 = LightGCN)
//   16      8     N (users)
//   24      8     M (items)
//   32      8     K (embedding dim)
//   40      8     L (propagation layers; 0 for MF)
//   48      8     seed
//   56      8     epochs trained
//   64      ...   user embedding, N*K reals, row-major
//           ...   item embedding, M*K reals, row-major
//           ...   LightGCN only: layer-0 user then item parameters
//
// The user/item blocks hold the scoring embeddings, so a checkpoint written
// after unlearning carries the replaced user matrix.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "attrunlearn/common.hpp"
#include "attrunlearn/recsys/model.hpp"

namespace attrunlearn::recsys {

inline constexpr char kCheckpointMagic[8] = {'A', 'U', 'E', 'M', 'B', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  char buf[sizeof(T)];
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    buf[b] = static_cast<char>((value >> (8 * b)) & 0xff);
  }
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error("checkpoint: truncated file");
  }
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(buf[b]) << (8 * b);
  return value;
}

inline void put_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_le(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
}

inline Matrix get_matrix(std::istream& in, std::uint64_t rows, std::uint64_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(in));
    }
  }
  return m;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const EmbeddingModel& model) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.kind));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.user_emb.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.item_emb.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.user_emb.cols()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.layers));
  detail::put_le<std::uint64_t>(out, model.config.seed);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.epochs_trained));
  detail::put_matrix(out, model.user_emb);
  detail::put_matrix(out, model.item_emb);
  if (model.kind == ModelKind::kLightGCN) {
    detail::put_matrix(out, model.base_user);
    detail::put_matrix(out, model.base_item);
  }
}

// Restores the embeddings and header fields. Training hyper-parameters other
// than seed and layer count are not part of the format.
inline EmbeddingModel read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("checkpoint: bad magic");
  }
  if (detail::get_le<std::uint32_t>(in) != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version");
  }
  const auto kind = detail::get_le<std::uint32_t>(in);
  if (kind > 1) throw Error("checkpoint: unknown model kind");
  EmbeddingModel model;
  model.kind = static_cast<ModelKind>(kind);
  const auto n = detail::get_le<std::uint64_t>(in);
  const auto m = detail::get_le<std::uint64_t>(in);
  const auto k = detail::get_le<std::uint64_t>(in);
  model.layers = static_cast<int>(detail::get_le<std::uint64_t>(in));
  model.config.seed = detail::get_le<std::uint64_t>(in);
  model.epochs_trained = static_cast<int>(detail::get_le<std::uint64_t>(in));
  model.config.embedding_dim = static_cast<int>(k);
  model.config.layers = model.layers;
  model.config.epochs = model.epochs_trained;
  model.user_emb = detail::get_matrix(in, n, k);
  model.item_emb = detail::get_matrix(in, m, k);
  if (model.kind == ModelKind::kLightGCN) {
    model.base_user = detail::get_matrix(in, n, k);
    model.base_item = detail::get_matrix(in, m, k);
  }
  return model;
}

inline void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(str_cat("cannot write ", path.string()));
  write_checkpoint(out, model);
  if (!out) throw Error(str_cat("write failed: ", path.string()));
}

inline EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(str_cat("cannot open ", path.string()));
  return read_checkpoint(in);
}

}  // namespace attrunlearn::recsys
