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

// Users whose embeddings and labels the attacker sees (the shadow dataset),
// and the rest, on which the attack is scored.
struct ShadowSplit {
  std::vector<Index> exposed;
  std::vector<Index> held_out;
  std::uint64_t seed = 0;
};

inline constexpr int kShadowRetries = 100;

// Uniform sample of round(fraction * N) users without replacement, redrawn
// until both label groups are exposed. Both lists are sorted.
inline ShadowSplit shadow_split(const AttributeTable& labels, double fraction = 0.1,
                                std::uint64_t seed = 0) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("shadow_split: fraction must be in (0, 1)");
  const auto n = static_cast<Index>(labels.size());
  const auto n_exposed = static_cast<Index>(std::llround(fraction * n));
  if (n_exposed < 2) {
    throw Error(str_cat("shadow_split: ", n_exposed,
                        " exposed user(s) cannot cover both groups; need N * fraction >= 2"));
  }
  if (n_exposed >= n) throw Error("shadow_split: no users left to hold out");
  labels.require_both_groups("shadow_split");

  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < kShadowRetries; ++attempt) {
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    bool seen[2] = {false, false};
    for (Index k = 0; k < n_exposed; ++k) seen[labels.label(order[static_cast<std::size_t>(k)])] = true;
    if (!seen[0] || !seen[1]) continue;
    ShadowSplit s;
    s.seed = seed;
    s.exposed.assign(order.begin(), order.begin() + n_exposed);
    s.held_out.assign(order.begin() + n_exposed, order.end());
    std::sort(s.exposed.begin(), s.exposed.end());
    std::sort(s.held_out.begin(), s.held_out.end());
    return s;
  }
  throw Error("shadow_split: could not expose both groups; a group is too small");
}

namespace detail {

inline void require_two_per_class(std::span<const Label> y, std::string_view who) {
  std::size_t ones = 0;
  for (Label l : y) {
    if (l > 1) throw Error(str_cat(who, ": labels must be 0 or 1"));
    ones += l;
  }
  if (ones < 2 || y.size() - ones < 2) {
    throw Error(str_cat(who, ": need at least two examples of each class"));
  }
}

}  // namespace detail

inline Matrix gather_rows(const MatrixRef& m, std::span<const Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

inline std::vector<Label> gather_labels(const AttributeTable& labels, std::span<const Index> rows) {
  std::vector<Label> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = labels.label(rows[k]);
  return out;
}

}  // namespace attrunlearn::attack
