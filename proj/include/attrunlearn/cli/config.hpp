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

// Experiment configuration. A JSON document with optional sections; every
// omitted key takes the library default, unknown keys are rejected, and
// schema errors name the offending key path (for example
// "unlearn[1].alpha: expected a number").
//
//   {
//     "seed": 0, "repeats": 10, "threads": 0, "output_dir": "runs/ml100k-mf",
//     "dataset": {"name": "ml-100k", "ratings": "...", "attributes": "...",
//                 "format": "ml-100k", "min_count": 5, "filter": "fixpoint",
//                 "split": {"train": 0.8, "val": 0.1, "test": 0.1}, "seed": 42},
//     "model":   {"kind": "mf", "embedding_dim": 16, "learning_rate": 0.001, ...},
//     "unlearn": [{"loss": "u2u_r"}, {"loss": "d2d_r", "alpha": 1e-4}],
//     "retrain": {"enabled": true, "lambda": 1.0},
//     "attack":  {"fraction": 0.1, "mlp": {...}, "gbt": {...}},
//     "eval":    {"cutoffs": [5, 10]},
//     "analysis": {"bins": 50, "downsample": true, "projection_dims": 2},
//     "sweep":   {"loss": "d2d_r", "alphas": [0, 1e-6, 1e-4, 1e-2, 1]}
//   }
//
// Relative paths are resolved against the directory holding the config.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "attrunlearn/attack/attack.hpp"
#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/recsys/model.hpp"
#include "attrunlearn/unlearn/unlearn.hpp"
#include "json.hpp"

namespace attrunlearn::cli {

using Json = nlohmann::ordered_json;

class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(str_cat("config: ", path.empty() ? "<root>" : path, ": ", what)), path_(path) {}
  const std::string& key_path() const { return path_; }

 private:
  std::string path_;
};

struct DatasetSpec {
  std::string name = "ml-100k";
  std::filesystem::path ratings;
  std::filesystem::path attributes;
  RatingsFormat format = RatingsFormat::kMl100k;
  AttributesFormat attributes_format = AttributesFormat::kMl100k;
  DelimitedLayout layout;  // generic format only
  int min_count = 5;
  FilterMode filter = FilterMode::kFixpoint;
  SplitRatios split;
  std::uint64_t seed = 42;
};

struct RetrainSpec {
  bool enabled = true;
  double lambda = 1.0;
  unlearn::Bandwidth bandwidth = unlearn::Bandwidth::median();
};

struct AnalysisSpec {
  int bins = 50;
  bool downsample = true;
  int projection_dims = 2;
};

struct SweepSpec {
  unlearn::LossKind loss = unlearn::LossKind::kD2DR;
  std::vector<double> alphas = {0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;  // repeat i uses seed + i
  int repeats = 10;
  int threads = 0;         // 0: ATTRUNLEARN_THREADS or hardware concurrency
  std::filesystem::path output_dir;  // --out overrides
  DatasetSpec dataset;
  recsys::ModelKind model_kind = recsys::ModelKind::kMF;
  recsys::TrainConfig train = recsys::TrainConfig::defaults(recsys::ModelKind::kMF);
  std::vector<unlearn::UnlearnConfig> unlearn = {
      unlearn::UnlearnConfig::defaults(unlearn::LossKind::kU2UR),
      unlearn::UnlearnConfig::defaults(unlearn::LossKind::kD2DR)};
  RetrainSpec retrain;
  attack::AttackerConfig attack;
  std::vector<int> cutoffs = {5, 10};
  AnalysisSpec analysis;
  SweepSpec sweep;

  std::uint64_t repeat_seed(int i) const { return seed + static_cast<std::uint64_t>(i); }
  int worker_threads() const { return threads > 0 ? std::min(threads, thread_cap()) : thread_cap(); }
};

namespace detail {

// Cursor over one JSON object that tracks its key path and the keys read,
// so leftovers can be reported as unknown.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string child(std::string_view key) const {
    return path_.empty() ? std::string(key) : str_cat(path_, ".", key);
  }

  const Json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = node_.find(std::string(key));
    return it == node_.end() ? nullptr : &*it;
  }

  void number(std::string_view key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(child(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(std::string_view key, Int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(child(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = v->get<Int>();
          return;
        }
        throw ConfigError(child(key), "expected a non-negative integer");
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(std::string_view key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(child(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  bool string(std::string_view key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(child(key), "expected a string");
      out = v->get<std::string>();
      return true;
    }
    return false;
  }

  template <typename Enum, typename Parse>
  void choice(std::string_view key, Enum& out, Parse&& parse) {
    std::string s;
    if (!string(key, s)) return;
    try {
      out = parse(s);
    } catch (const Error& e) {
      throw ConfigError(child(key), e.what());
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline RatingsFormat parse_ratings_format(std::string_view s) {
  if (s == "ml-100k" || s == "ml100k") return RatingsFormat::kMl100k;
  if (s == "ml-1m" || s == "ml1m") return RatingsFormat::kMl1m;
  if (s == "generic") return RatingsFormat::kGeneric;
  throw Error(str_cat("unknown format '", s, "' (ml-100k, ml-1m, generic)"));
}

inline AttributesFormat parse_attributes_format(std::string_view s) {
  if (s == "ml-100k" || s == "ml100k") return AttributesFormat::kMl100k;
  if (s == "ml-1m" || s == "ml1m") return AttributesFormat::kMl1m;
  throw Error(str_cat("unknown attributes format '", s, "' (ml-100k, ml-1m)"));
}

inline std::string to_string(RatingsFormat f) {
  switch (f) {
    case RatingsFormat::kMl100k: return "ml-100k";
    case RatingsFormat::kMl1m: return "ml-1m";
    case RatingsFormat::kGeneric: return "generic";
  }
  return "?";
}

inline std::string to_string(AttributesFormat f) {
  return f == AttributesFormat::kMl100k ? "ml-100k" : "ml-1m";
}

inline FilterMode parse_filter_mode(std::string_view s) {
  if (s == "fixpoint") return FilterMode::kFixpoint;
  if (s == "single_pass" || s == "single-pass") return FilterMode::kSinglePass;
  throw Error(str_cat("unknown filter mode '", s, "' (fixpoint, single_pass)"));
}

inline unlearn::StepRule parse_step_rule(std::string_view s) {
  if (s == "adam") return unlearn::StepRule::kAdam;
  if (s == "gd" || s == "sgd") return unlearn::StepRule::kGradientDescent;
  throw Error(str_cat("unknown step rule '", s, "' (adam, gd)"));
}

inline void read_bandwidth(Section& sec, unlearn::Bandwidth& bw) {
  const Json* v = sec.find("bandwidth");
  if (!v) return;
  if (v->is_string() && v->get<std::string>() == "median") {
    bw = unlearn::Bandwidth::median();
  } else if (v->is_number() && v->get<double>() > 0.0) {
    bw = unlearn::Bandwidth::fixed(v->get<double>());
  } else {
    throw ConfigError(sec.child("bandwidth"), "expected \"median\" or a positive number");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline void read_dataset(const Json& node, const std::filesystem::path& base, DatasetSpec& d) {
  Section sec(node, "dataset");
  sec.string("name", d.name);
  std::string path;
  if (sec.string("ratings", path)) d.ratings = resolve(base, path);
  if (sec.string("attributes", path)) d.attributes = resolve(base, path);
  sec.choice("format", d.format, parse_ratings_format);
  sec.choice("attributes_format", d.attributes_format, parse_attributes_format);
  if (!node.contains("attributes_format")) {
    d.attributes_format = d.format == RatingsFormat::kMl1m ? AttributesFormat::kMl1m
                                                           : AttributesFormat::kMl100k;
  }
  if (const Json* layout = sec.find("layout")) {
    Section l(*layout, sec.child("layout"));
    l.string("delimiter", d.layout.delimiter);
    l.integer("user_column", d.layout.user_column);
    l.integer("item_column", d.layout.item_column);
    l.integer("rating_column", d.layout.rating_column);
    l.integer("timestamp_column", d.layout.timestamp_column);
    l.integer("header_lines", d.layout.header_lines);
    l.finish();
  }
  sec.integer("min_count", d.min_count);
  sec.choice("filter", d.filter, parse_filter_mode);
  if (const Json* split = sec.find("split")) {
    Section s(*split, sec.child("split"));
    s.number("train", d.split.train);
    s.number("val", d.split.val);
    s.number("test", d.split.test);
    s.finish();
    const double sum = d.split.train + d.split.val + d.split.test;
    if (d.split.train <= 0.0 || d.split.val < 0.0 || d.split.test < 0.0 || std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError(sec.child("split"), "ratios must be non-negative, train > 0, summing to 1");
    }
  }
  sec.integer("seed", d.seed);
  sec.finish();
  if (d.min_count < 1) throw ConfigError("dataset.min_count", "must be >= 1");
}

inline void read_model(const Json& node, ExperimentConfig& c) {
  Section sec(node, "model");
  sec.choice("kind", c.model_kind, recsys::parse_model_kind);
  recsys::TrainConfig t = recsys::TrainConfig::defaults(c.model_kind);
  sec.number("learning_rate", t.learning_rate);
  sec.integer("epochs", t.epochs);
  sec.integer("batch_size", t.batch_size);
  sec.integer("negatives", t.negatives);
  sec.number("init_std", t.init_std);
  sec.integer("embedding_dim", t.embedding_dim);
  sec.integer("layers", t.layers);
  sec.finish();
  try {
    t.validate();
  } catch (const Error& e) {
    throw ConfigError("model", e.what());
  }
  c.train = t;
}

inline unlearn::UnlearnConfig read_unlearn_entry(const Json& node, const std::string& path) {
  Section sec(node, path);
  unlearn::LossKind kind = unlearn::LossKind::kD2DR;
  if (!node.contains("loss")) throw ConfigError(sec.child("loss"), "missing (u2u_r or d2d_r)");
  sec.choice("loss", kind, unlearn::parse_loss_kind);
  auto u = unlearn::UnlearnConfig::defaults(kind);
  sec.number("alpha", u.alpha);
  sec.number("learning_rate", u.learning_rate);
  sec.integer("epochs", u.epochs);
  read_bandwidth(sec, u.bandwidth);
  sec.choice("step_rule", u.step_rule, parse_step_rule);
  sec.integer("batch_rows", u.batch_rows);
  sec.finish();
  try {
    u.validate();
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return u;
}

inline void read_attack(const Json& node, attack::AttackerConfig& a) {
  Section sec(node, "attack");
  sec.number("fraction", a.fraction);
  if (!(a.fraction > 0.0 && a.fraction < 1.0)) throw ConfigError("attack.fraction", "must be in (0, 1)");
  if (const Json* mlp = sec.find("mlp")) {
    Section m(*mlp, "attack.mlp");
    m.integer("hidden", a.mlp.hidden);
    m.number("l2", a.mlp.l2);
    m.integer("max_iterations", a.mlp.max_iterations);
    m.number("learning_rate", a.mlp.learning_rate);
    m.integer("batch_size", a.mlp.batch_size);
    m.number("tolerance", a.mlp.tolerance);
    m.integer("patience", a.mlp.patience);
    m.finish();
  }
  if (const Json* gbt = sec.find("gbt")) {
    Section g(*gbt, "attack.gbt");
    g.integer("rounds", a.gbt.rounds);
    g.integer("max_depth", a.gbt.max_depth);
    g.number("shrinkage", a.gbt.shrinkage);
    g.number("lambda", a.gbt.lambda);
    g.number("gamma", a.gbt.gamma);
    g.number("min_child_weight", a.gbt.min_child_weight);
    g.finish();
  }
  sec.finish();
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& root, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  detail::Section sec(root, "");
  sec.integer("seed", c.seed);
  sec.integer("repeats", c.repeats);
  if (c.repeats < 1) throw ConfigError("repeats", "must be >= 1");
  sec.integer("threads", c.threads);
  if (c.threads < 0) throw ConfigError("threads", "must be >= 0");
  std::string out_dir;
  if (sec.string("output_dir", out_dir)) c.output_dir = detail::resolve(base_dir, out_dir);
  if (const Json* d = sec.find("dataset")) detail::read_dataset(*d, base_dir, c.dataset);
  if (const Json* m = sec.find("model")) detail::read_model(*m, c);
  if (const Json* u = sec.find("unlearn")) {
    if (!u->is_array()) throw ConfigError("unlearn", "expected an array");
    c.unlearn.clear();
    std::set<unlearn::LossKind> kinds;
    for (std::size_t i = 0; i < u->size(); ++i) {
      const std::string path = str_cat("unlearn[", i, "]");
      c.unlearn.push_back(detail::read_unlearn_entry((*u)[i], path));
      if (!kinds.insert(c.unlearn.back().loss_kind).second) {
        throw ConfigError(path, "duplicate loss kind");
      }
    }
  }
  if (const Json* r = sec.find("retrain")) {
    detail::Section rs(*r, "retrain");
    rs.boolean("enabled", c.retrain.enabled);
    rs.number("lambda", c.retrain.lambda);
    detail::read_bandwidth(rs, c.retrain.bandwidth);
    rs.finish();
    if (!(c.retrain.lambda >= 0.0)) throw ConfigError("retrain.lambda", "must be >= 0");
  }
  if (const Json* a = sec.find("attack")) detail::read_attack(*a, c.attack);
  if (const Json* e = sec.find("eval")) {
    detail::Section es(*e, "eval");
    if (const Json* k = es.find("cutoffs")) {
      if (!k->is_array() || k->empty()) throw ConfigError("eval.cutoffs", "expected a non-empty array");
      c.cutoffs.clear();
      for (std::size_t i = 0; i < k->size(); ++i) {
        const Json& v = (*k)[i];
        if (!v.is_number_integer() || v.get<int>() < 1) {
          throw ConfigError(str_cat("eval.cutoffs[", i, "]"), "expected a positive integer");
        }
        c.cutoffs.push_back(v.get<int>());
      }
      std::sort(c.cutoffs.begin(), c.cutoffs.end());
      c.cutoffs.erase(std::unique(c.cutoffs.begin(), c.cutoffs.end()), c.cutoffs.end());
    }
    es.finish();
  }
  if (const Json* a = sec.find("analysis")) {
    detail::Section as(*a, "analysis");
    as.integer("bins", c.analysis.bins);
    as.boolean("downsample", c.analysis.downsample);
    as.integer("projection_dims", c.analysis.projection_dims);
    as.finish();
    if (c.analysis.bins < 1) throw ConfigError("analysis.bins", "must be >= 1");
    if (c.analysis.projection_dims < 2) throw ConfigError("analysis.projection_dims", "must be >= 2");
  }
  if (const Json* s = sec.find("sweep")) {
    detail::Section ss(*s, "sweep");
    ss.choice("loss", c.sweep.loss, unlearn::parse_loss_kind);
    if (const Json* g = ss.find("alphas")) {
      if (!g->is_array() || g->empty()) throw ConfigError("sweep.alphas", "expected a non-empty array");
      c.sweep.alphas.clear();
      for (std::size_t i = 0; i < g->size(); ++i) {
        const Json& v = (*g)[i];
        if (!v.is_number() || v.get<double>() < 0.0) {
          throw ConfigError(str_cat("sweep.alphas[", i, "]"), "expected a non-negative number");
        }
        c.sweep.alphas.push_back(v.get<double>());
      }
    }
    ss.finish();
  }
  sec.finish();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(str_cat("cannot open config ", path.string()));
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(str_cat("config ", path.string(), ": ", e.what()));
  }
  return parse_config(root, path.parent_path());
}

inline Json bandwidth_json(const unlearn::Bandwidth& bw) {
  return bw.mode == unlearn::Bandwidth::Mode::kMedian ? Json("median") : Json(bw.sigma);
}

inline Json unlearn_json(const unlearn::UnlearnConfig& u) {
  return Json{{"loss", unlearn::to_string(u.loss_kind)},
              {"alpha", u.alpha},
              {"learning_rate", u.learning_rate},
              {"epochs", u.epochs},
              {"bandwidth", bandwidth_json(u.bandwidth)},
              {"step_rule", u.step_rule == unlearn::StepRule::kAdam ? "adam" : "gd"},
              {"batch_rows", u.batch_rows}};
}

// Fully resolved config with every default spelled out. Its hash
// fingerprints a run.
inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["repeats"] = c.repeats;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir.generic_string();
  const auto& d = c.dataset;
  j["dataset"] = Json{{"name", d.name},
                      {"ratings", d.ratings.generic_string()},
                      {"attributes", d.attributes.generic_string()},
                      {"format", detail::to_string(d.format)},
                      {"attributes_format", detail::to_string(d.attributes_format)},
                      {"layout", Json{{"delimiter", d.layout.delimiter},
                                      {"user_column", d.layout.user_column},
                                      {"item_column", d.layout.item_column},
                                      {"rating_column", d.layout.rating_column},
                                      {"timestamp_column", d.layout.timestamp_column},
                                      {"header_lines", d.layout.header_lines}}},
                      {"min_count", d.min_count},
                      {"filter", d.filter == FilterMode::kFixpoint ? "fixpoint" : "single_pass"},
                      {"split", Json{{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}}},
                      {"seed", d.seed}};
  const auto& t = c.train;
  j["model"] = Json{{"kind", recsys::to_string(c.model_kind)},
                    {"learning_rate", t.learning_rate},
                    {"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"negatives", t.negatives},
                    {"init_std", t.init_std},
                    {"embedding_dim", t.embedding_dim},
                    {"layers", t.layers}};
  j["unlearn"] = Json::array();
  for (const auto& u : c.unlearn) j["unlearn"].push_back(unlearn_json(u));
  j["retrain"] = Json{{"enabled", c.retrain.enabled},
                      {"lambda", c.retrain.lambda},
                      {"bandwidth", bandwidth_json(c.retrain.bandwidth)}};
  const auto& a = c.attack;
  j["attack"] = Json{{"fraction", a.fraction},
                     {"mlp", Json{{"hidden", a.mlp.hidden},
                                  {"l2", a.mlp.l2},
                                  {"max_iterations", a.mlp.max_iterations},
                                  {"learning_rate", a.mlp.learning_rate},
                                  {"batch_size", a.mlp.batch_size},
                                  {"tolerance", a.mlp.tolerance},
                                  {"patience", a.mlp.patience}}},
                     {"gbt", Json{{"rounds", a.gbt.rounds},
                                  {"max_depth", a.gbt.max_depth},
                                  {"shrinkage", a.gbt.shrinkage},
                                  {"lambda", a.gbt.lambda},
                                  {"gamma", a.gbt.gamma},
                                  {"min_child_weight", a.gbt.min_child_weight}}}};
  j["eval"] = Json{{"cutoffs", c.cutoffs}};
  j["analysis"] = Json{{"bins", c.analysis.bins},
                       {"downsample", c.analysis.downsample},
                       {"projection_dims", c.analysis.projection_dims}};
  j["sweep"] = Json{{"loss", unlearn::to_string(c.sweep.loss)}, {"alphas", c.sweep.alphas}};
  return j;
}

// Threads and the output location are excluded: they do not change results.
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("threads");
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace attrunlearn::cli
