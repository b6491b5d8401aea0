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

#include <string>

#include "attrunlearn/attack/gbt.hpp"
#include "attrunlearn/attack/metrics.hpp"
#include "attrunlearn/attack/mlp.hpp"
#include "attrunlearn/attack/shadow.hpp"

namespace attrunlearn::attack {

enum class AttackerKind { kMlp, kGbt };

inline std::string to_string(AttackerKind k) { return k == AttackerKind::kMlp ? "mlp" : "gbt"; }

struct AttackerConfig {
  MlpConfig mlp;
  GbtConfig gbt;
  double fraction = 0.1;
  std::uint64_t seed = 0;
};

struct AttackOutcome {
  AttackReport mlp;
  AttackReport gbt;
  ShadowSplit split;
};

// Full grey-box attack on one embedding snapshot: expose a shadow set,
// train both attackers on it from scratch, score the held-out users.
inline AttackOutcome run_attacks(const MatrixRef& theta, const AttributeTable& labels,
                                 const AttackerConfig& cfg) {
  if (static_cast<std::size_t>(theta.rows()) != labels.size()) {
    throw ShapeError("attack: embedding rows and labels differ");
  }
  AttackOutcome out;
  out.split = shadow_split(labels, cfg.fraction, cfg.seed);
  const Matrix x_train = gather_rows(theta, out.split.exposed);
  const auto y_train = gather_labels(labels, out.split.exposed);
  const Matrix x_test = gather_rows(theta, out.split.held_out);
  const auto y_test = gather_labels(labels, out.split.held_out);

  MlpConfig mlp_cfg = cfg.mlp;
  mlp_cfg.seed = cfg.seed;
  GbtConfig gbt_cfg = cfg.gbt;
  gbt_cfg.seed = cfg.seed;
  const auto mlp = train_mlp_attacker(x_train, y_train, mlp_cfg);
  out.mlp = evaluate_attack(mlp.predict_proba(x_test), y_test);
  const auto gbt = train_gbt_attacker(x_train, y_train, gbt_cfg);
  out.gbt = evaluate_attack(gbt.predict_proba(x_test), y_test);
  return out;
}

}  // namespace attrunlearn::attack
