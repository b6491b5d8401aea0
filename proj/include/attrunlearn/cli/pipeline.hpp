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

// Stage orchestration for the command-line tool. A run directory holds:
//
//   config.json                      resolved configuration
//   manifest.json                    stage timings, seeds, file hashes
//   data/dataset.tsv, data/attributes.tsv
//   repeat-<i>/<source>/             source = original, u2u_r, d2d_r, retrain
//       embedding.ckpt  meta.txt  [loss_trace.csv]  attack.csv  eval.csv
//   tables/attack_summary.csv, rec_summary.csv, timing_summary.csv
//   analysis/...
//
// Every unit of work writes its completion marker last, so an interrupted
// run resumes by skipping the units whose marker exists. --force recomputes.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "attrunlearn/analysis/histogram.hpp"
#include "attrunlearn/analysis/pca.hpp"
#include "attrunlearn/analysis/report.hpp"
#include "attrunlearn/analysis/sweep.hpp"
#include "attrunlearn/attack/attack.hpp"
#include "attrunlearn/cli/config.hpp"
#include "attrunlearn/data.hpp"
#include "attrunlearn/recsys/checkpoint.hpp"
#include "attrunlearn/recsys/lightgcn.hpp"
#include "attrunlearn/recsys/metrics.hpp"
#include "attrunlearn/recsys/mf.hpp"
#include "attrunlearn/unlearn/retrain.hpp"
#include "attrunlearn/unlearn/unlearn.hpp"

namespace attrunlearn::cli {

namespace fs = std::filesystem;

// Carries the stage that failed so the tool can name it on exit.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr const char* kOriginal = "original";
inline constexpr const char* kRetrain = "retrain";

// ---------------------------------------------------------------------------
// Small file helpers.
// ---------------------------------------------------------------------------

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_meta(const fs::path& path, const KeyValues& kv) {
  std::string text;
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
  analysis::write_text_file(path, text);
}

inline std::map<std::string, std::string> read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(str_cat("cannot open ", path.string()));
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(str_cat("csv: no column '", name, "'"));
  }
};

inline CsvData read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(str_cat("cannot open ", path.string()));
  CsvData out;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      f.push_back(s.substr(start, comma - start));
      if (comma == std::string::npos) return f;
      start = comma + 1;
    }
  };
  if (!std::getline(in, line)) throw Error(str_cat(path.string(), ": empty csv"));
  out.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.rows.push_back(split(line));
    if (out.rows.back().size() != out.header.size()) {
      throw Error(str_cat(path.string(), ": ragged row ", out.rows.size()));
    }
  }
  return out;
}

inline double parse_real(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(str_cat("not a number: '", s, "'"));
  }
  return v;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run context.
// ---------------------------------------------------------------------------

struct UnitRecord {
  std::string stage;
  std::string unit;
  bool computed = false;
  double seconds = 0.0;
};

class Run {
 public:
  Run(ExperimentConfig cfg, fs::path out, bool force, std::ostream* log = &std::cerr)
      : cfg_(std::move(cfg)), out_(std::move(out)), force_(force), log_(log) {
    if (cfg_.dataset.name.find_first_of(",\n") != std::string::npos) {
      throw ConfigError("dataset.name", "must not contain commas or newlines");
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  const fs::path& out() const { return out_; }
  bool force() const { return force_; }

  fs::path data_dir() const { return out_ / "data"; }
  fs::path dataset_path() const { return data_dir() / "dataset.tsv"; }
  fs::path attributes_path() const { return data_dir() / "attributes.tsv"; }
  fs::path repeat_dir(int i) const { return out_ / str_cat("repeat-", i); }
  fs::path source_dir(int i, const std::string& source) const { return repeat_dir(i) / source; }
  fs::path tables_dir() const { return out_ / "tables"; }
  fs::path analysis_dir() const { return out_ / "analysis"; }

  // Embedding sources in report order.
  std::vector<std::string> sources() const {
    std::vector<std::string> s = {kOriginal};
    for (const auto& u : cfg_.unlearn) s.push_back(unlearn::to_string(u.loss_kind));
    if (cfg_.retrain.enabled) s.push_back(kRetrain);
    return s;
  }

  void log(const std::string& stage, const std::string& msg) {
    if (!log_) return;
    std::lock_guard<std::mutex> lock(mutex_);
    *log_ << "[" << stage << "] " << msg << std::endl;
  }

  // Runs `fn` unless `marker` exists (and --force is off); an empty marker
  // always runs. Exceptions are rethrown as StageError naming `stage`.
  template <typename Fn>
  void unit(const std::string& stage, const std::string& name, const fs::path& marker, Fn&& fn) {
    UnitRecord rec{stage, name, false, 0.0};
    if (!force_ && !marker.empty() && fs::exists(marker)) {
      log(stage, name + ": up to date");
    } else {
      Stopwatch clock;
      try {
        fn();
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(stage, str_cat(name, ": ", e.what()));
      }
      rec.computed = true;
      rec.seconds = clock.seconds();
      log(stage, str_cat(name, ": done in ", format_real(std::round(rec.seconds * 1000.0) / 1000.0), " s"));
    }
    std::lock_guard<std::mutex> lock(mutex_);
    records_.push_back(std::move(rec));
  }

  std::vector<UnitRecord> records() const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto r = records_;
    std::stable_sort(r.begin(), r.end(), [](const UnitRecord& a, const UnitRecord& b) {
      return std::tie(a.stage, a.unit) < std::tie(b.stage, b.unit);
    });
    return r;
  }

  // Upstream artifacts, loaded lazily and shared by all stages of one
  // invocation.
  const InteractionDataset& dataset() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!dataset_) {
      require(dataset_path(), "prepare");
      std::ifstream in(dataset_path());
      dataset_ = std::make_unique<InteractionDataset>(read_dataset(in));
    }
    return *dataset_;
  }

  const AttributeTable& labels() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!labels_) {
      require(attributes_path(), "prepare");
      std::ifstream in(attributes_path());
      labels_ = std::make_unique<AttributeTable>(read_attributes(in));
    }
    return *labels_;
  }

  void reset_cache() {
    std::lock_guard<std::mutex> lock(mutex_);
    dataset_.reset();
    labels_.reset();
  }

  static void require(const fs::path& path, const std::string& command) {
    if (!fs::exists(path)) {
      throw Error(str_cat("missing ", path.string(), "; run `attrunlearn ", command, "` first"));
    }
  }

 private:
  ExperimentConfig cfg_;
  fs::path out_;
  bool force_;
  std::ostream* log_;
  mutable std::mutex mutex_;
  std::vector<UnitRecord> records_;
  std::unique_ptr<InteractionDataset> dataset_;
  std::unique_ptr<AttributeTable> labels_;
};

// The command that produces a source, for missing-artifact messages.
inline std::string producer_of(const std::string& source) {
  return source == kOriginal ? "train" : "unlearn";
}

// Writes config.json on first use; afterwards refuses to mix outputs of a
// different configuration into the same directory unless forced.
inline void bind_run_directory(Run& run) {
  const fs::path path = run.out() / "config.json";
  const std::string hash = config_hash(run.config());
  if (fs::exists(path) && !run.force()) {
    std::ifstream in(path);
    Json stored;
    try {
      stored = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw StageError("setup", str_cat(path.string(), ": ", e.what()));
    }
    if (!stored.contains("config_hash") || stored["config_hash"] != hash) {
      throw StageError("setup", str_cat(run.out().string(),
                                        " holds a run with a different configuration; "
                                        "use --force or another --out"));
    }
    return;
  }
  Json doc;
  doc["config_hash"] = hash;
  doc["config"] = to_json(run.config());
  analysis::write_text_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

inline void cmd_prepare(Run& run) {
  run.unit("prepare", "dataset", run.attributes_path(), [&] {
    const auto& d = run.config().dataset;
    if (d.ratings.empty()) throw ConfigError("dataset.ratings", "missing");
    if (d.attributes.empty()) throw ConfigError("dataset.attributes", "missing");
    auto raw = parse_ratings(d.ratings, d.format, d.layout);
    const auto labels_raw = parse_attributes(d.attributes, d.attributes_format);
    raw = filter_min_interactions(std::move(raw), d.min_count, d.filter);
    const InteractionDataset ds = split_dataset(raw, d.split, d.seed);
    const AttributeTable labels = build_attribute_table(ds, labels_raw);
    labels.require_both_groups("prepare");
    std::ostringstream ds_text, attr_text;
    write_dataset(ds_text, ds);
    write_attributes(attr_text, labels);
    analysis::write_text_file(run.dataset_path(), ds_text.str());
    analysis::write_text_file(run.attributes_path(), attr_text.str());
    run.log("prepare", str_cat(ds.n_users, " users (", labels.group(0).size(), " group 0, ",
                               labels.group(1).size(), " group 1), ", ds.n_items, " items, ",
                               ds.interactions.size(), " interactions"));
  });
  run.reset_cache();
}

inline recsys::EmbeddingModel train_model(const InteractionDataset& ds, recsys::ModelKind kind,
                                          const recsys::TrainConfig& cfg) {
  return kind == recsys::ModelKind::kMF ? recsys::train_mf(ds, cfg)
                                        : recsys::train_lightgcn(ds, cfg);
}

inline void train_repeat(Run& run, int i) {
  const fs::path dir = run.source_dir(i, kOriginal);
  run.unit("train", str_cat("repeat-", i), dir / "meta.txt", [&] {
    const auto& cfg = run.config();
    recsys::TrainConfig tc = cfg.train;
    tc.seed = cfg.repeat_seed(i);
    Stopwatch clock;
    const auto model = train_model(run.dataset(), cfg.model_kind, tc);
    const double seconds = clock.seconds();
    fs::create_directories(dir);
    recsys::save_checkpoint(dir / "embedding.ckpt", model);
    write_meta(dir / "meta.txt", {{"source", kOriginal},
                                  {"model", recsys::to_string(cfg.model_kind)},
                                  {"seed", std::to_string(tc.seed)},
                                  {"epochs", std::to_string(model.epochs_trained)},
                                  {"wall_seconds", format_real(seconds)}});
  });
}

inline void cmd_train(Run& run) {
  run.dataset();
  parallel_for(run.config().repeats, run.config().worker_threads(),
               [&](int i) { train_repeat(run, i); });
}

inline void write_loss_trace(const fs::path& path, const std::vector<unlearn::LossValue>& trace) {
  analysis::CsvTable t{"", {"epoch", "total", "lu", "lr"}, {}};
  t.rows.reserve(trace.size());
  for (std::size_t e = 0; e < trace.size(); ++e) {
    t.rows.push_back({std::to_string(e), format_real(trace[e].total),
                      format_real(trace[e].distinguishability),
                      format_real(trace[e].regularization)});
  }
  analysis::write_text_file(path, t.render());
}

inline void unlearn_repeat(Run& run, int i, const unlearn::UnlearnConfig& base) {
  const std::string name = unlearn::to_string(base.loss_kind);
  const fs::path dir = run.source_dir(i, name);
  run.unit("unlearn", str_cat("repeat-", i, "/", name), dir / "meta.txt", [&] {
    const fs::path src = run.source_dir(i, kOriginal) / "embedding.ckpt";
    Run::require(src, "train");
    const auto model = recsys::load_checkpoint(src);
    unlearn::UnlearnConfig uc = base;
    uc.seed = run.config().repeat_seed(i);
    const auto result = unlearn::unlearn(model.user_emb, run.labels(), uc);
    fs::create_directories(dir);
    recsys::save_checkpoint(dir / "embedding.ckpt", recsys::replace_user_embedding(model, result.theta));
    write_loss_trace(dir / "loss_trace.csv", result.loss_trace);
    const auto& last = result.loss_trace.back();
    write_meta(dir / "meta.txt",
               {{"source", name},
                {"config", unlearn_json(uc).dump()},
                {"seed", std::to_string(uc.seed)},
                {"initial_loss", format_real(result.loss_trace.front().total)},
                {"final_loss", format_real(last.total)},
                {"final_sigma", format_real(result.final_sigma)},
                {"frob_dist", format_real((result.theta - model.user_emb).norm())},
                {"wall_seconds", format_real(result.wall_seconds)}});
  });
}

inline void retrain_repeat(Run& run, int i) {
  const fs::path dir = run.source_dir(i, kRetrain);
  run.unit("unlearn", str_cat("repeat-", i, "/", kRetrain), dir / "meta.txt", [&] {
    const auto& cfg = run.config();
    recsys::TrainConfig tc = cfg.train;
    tc.seed = cfg.repeat_seed(i);
    const auto result = unlearn::retrain_with_d2d(run.dataset(), run.labels(), cfg.model_kind, tc,
                                                  cfg.retrain.lambda, cfg.retrain.bandwidth);
    fs::create_directories(dir);
    recsys::save_checkpoint(dir / "embedding.ckpt", result.model);
    write_meta(dir / "meta.txt", {{"source", kRetrain},
                                  {"lambda", format_real(cfg.retrain.lambda)},
                                  {"seed", std::to_string(tc.seed)},
                                  {"wall_seconds", format_real(result.wall_seconds)}});
  });
}

inline void cmd_unlearn(Run& run) {
  run.dataset();
  run.labels();
  const auto& cfg = run.config();
  const int per_repeat = static_cast<int>(cfg.unlearn.size()) + (cfg.retrain.enabled ? 1 : 0);
  parallel_for(cfg.repeats * per_repeat, cfg.worker_threads(), [&](int job) {
    const int i = job / per_repeat;
    const int m = job % per_repeat;
    if (m < static_cast<int>(cfg.unlearn.size())) {
      unlearn_repeat(run, i, cfg.unlearn[static_cast<std::size_t>(m)]);
    } else {
      retrain_repeat(run, i);
    }
  });
}

inline const std::vector<std::string> kAttackHeader = {
    "dataset", "model", "method", "attacker", "acc", "precision", "recall", "auc", "seed"};

inline std::vector<std::string> attack_row(const Run& run, const std::string& source,
                                           attack::AttackerKind kind,
                                           const attack::AttackReport& r, std::uint64_t seed) {
  return {run.config().dataset.name, recsys::to_string(run.config().model_kind), source,
          attack::to_string(kind), format_real(r.accuracy), format_real(r.precision),
          format_real(r.recall), format_real(r.auc), std::to_string(seed)};
}

inline void attack_repeat(Run& run, int i, const std::string& source) {
  const fs::path dir = run.source_dir(i, source);
  run.unit("attack", str_cat("repeat-", i, "/", source), dir / "attack.csv", [&] {
    const fs::path ckpt = dir / "embedding.ckpt";
    Run::require(dir / "meta.txt", producer_of(source));
    const auto model = recsys::load_checkpoint(ckpt);
    attack::AttackerConfig ac = run.config().attack;
    ac.seed = run.config().repeat_seed(i);
    const auto outcome = attack::run_attacks(model.user_emb, run.labels(), ac);
    analysis::CsvTable t{"", kAttackHeader, {}};
    t.rows.push_back(attack_row(run, source, attack::AttackerKind::kMlp, outcome.mlp, ac.seed));
    t.rows.push_back(attack_row(run, source, attack::AttackerKind::kGbt, outcome.gbt, ac.seed));
    analysis::write_text_file(dir / "attack.csv", t.render());
  });
}

inline std::vector<std::string> eval_header(const std::vector<int>& cutoffs) {
  std::vector<std::string> h = {"dataset", "model", "method"};
  for (int k : cutoffs) h.push_back(str_cat("ndcg", k));
  for (int k : cutoffs) h.push_back(str_cat("hr", k));
  h.push_back("users");
  h.push_back("seed");
  return h;
}

inline void eval_repeat(Run& run, int i, const std::string& source) {
  const fs::path dir = run.source_dir(i, source);
  run.unit("eval", str_cat("repeat-", i, "/", source), dir / "eval.csv", [&] {
    Run::require(dir / "meta.txt", producer_of(source));
    const auto model = recsys::load_checkpoint(dir / "embedding.ckpt");
    const auto& cfg = run.config();
    const auto rep = recsys::eval_ranking(model, run.dataset(), cfg.cutoffs);
    analysis::CsvTable t{"", eval_header(cfg.cutoffs), {}};
    std::vector<std::string> row = {cfg.dataset.name, recsys::to_string(cfg.model_kind), source};
    for (int k : cfg.cutoffs) row.push_back(format_real(rep.ndcg.at(k)));
    for (int k : cfg.cutoffs) row.push_back(format_real(rep.hr.at(k)));
    row.push_back(std::to_string(rep.users_evaluated));
    row.push_back(std::to_string(cfg.repeat_seed(i)));
    t.rows.push_back(std::move(row));
    analysis::write_text_file(dir / "eval.csv", t.render());
  });
}

inline std::vector<std::string> select_sources(const Run& run, const std::string& only) {
  const auto all = run.sources();
  if (only.empty() || only == "all") return all;
  if (std::find(all.begin(), all.end(), only) == all.end()) {
    throw StageError("setup", str_cat("unknown source '", only, "'"));
  }
  return {only};
}

inline void cmd_attack(Run& run, const std::string& only = "") {
  run.labels();
  const auto sources = select_sources(run, only);
  const int n = static_cast<int>(sources.size());
  parallel_for(run.config().repeats * n, run.config().worker_threads(), [&](int job) {
    attack_repeat(run, job / n, sources[static_cast<std::size_t>(job % n)]);
  });
}

inline void cmd_eval(Run& run, const std::string& only = "") {
  run.dataset();
  const auto sources = select_sources(run, only);
  const int n = static_cast<int>(sources.size());
  parallel_for(run.config().repeats * n, run.config().worker_threads(), [&](int job) {
    eval_repeat(run, job / n, sources[static_cast<std::size_t>(job % n)]);
  });
}

// Averaged tables over repeats, read back from the per-repeat files so a
// resumed run reports exactly what an uninterrupted one would.
inline std::vector<analysis::CsvTable> summary_tables(Run& run) {
  const auto& cfg = run.config();
  const auto sources = run.sources();
  const std::string model = recsys::to_string(cfg.model_kind);

  analysis::CsvTable attack_t{"tables/attack_summary.csv",
                              {"dataset", "model", "method", "attacker"}, {}};
  for (const char* m : {"acc", "precision", "recall", "auc"}) {
    attack_t.header.push_back(str_cat(m, "_mean"));
    attack_t.header.push_back(str_cat(m, "_std"));
  }
  attack_t.header.push_back("repeats");

  analysis::CsvTable rec_t{"tables/rec_summary.csv", {"dataset", "model", "method"}, {}};
  std::vector<std::string> rec_metrics;
  for (int k : cfg.cutoffs) rec_metrics.push_back(str_cat("ndcg", k));
  for (int k : cfg.cutoffs) rec_metrics.push_back(str_cat("hr", k));
  for (const auto& m : rec_metrics) {
    rec_t.header.push_back(m + "_mean");
    rec_t.header.push_back(m + "_std");
  }
  rec_t.header.push_back("repeats");

  analysis::CsvTable time_t{"tables/timing_summary.csv",
                            {"dataset", "model", "method", "seconds_mean", "seconds_std", "repeats"},
                            {}};

  for (const auto& source : sources) {
    std::map<std::string, std::vector<double>> attack_vals[2];
    std::map<std::string, std::vector<double>> rec_vals;
    std::vector<double> seconds;
    for (int i = 0; i < cfg.repeats; ++i) {
      const fs::path dir = run.source_dir(i, source);
      Run::require(dir / "attack.csv", "attack");
      Run::require(dir / "eval.csv", "eval");
      const CsvData a = read_csv(dir / "attack.csv");
      for (const auto& row : a.rows) {
        const int k = row[a.column("attacker")] == "mlp" ? 0 : 1;
        for (const char* m : {"acc", "precision", "recall", "auc"}) {
          attack_vals[k][m].push_back(parse_real(row[a.column(m)]));
        }
      }
      const CsvData e = read_csv(dir / "eval.csv");
      for (const auto& m : rec_metrics) rec_vals[m].push_back(parse_real(e.rows.at(0)[e.column(m)]));
      seconds.push_back(parse_real(read_meta(dir / "meta.txt").at("wall_seconds")));
    }
    for (int k = 0; k < 2; ++k) {
      std::vector<std::string> row = {cfg.dataset.name, model, source,
                                      k == 0 ? "mlp" : "gbt"};
      for (const char* m : {"acc", "precision", "recall", "auc"}) {
        const MeanStd s = mean_std(attack_vals[k][m]);
        row.push_back(format_real(s.mean));
        row.push_back(format_real(s.std));
      }
      row.push_back(std::to_string(cfg.repeats));
      attack_t.rows.push_back(std::move(row));
    }
    std::vector<std::string> rrow = {cfg.dataset.name, model, source};
    for (const auto& m : rec_metrics) {
      const MeanStd s = mean_std(rec_vals[m]);
      rrow.push_back(format_real(s.mean));
      rrow.push_back(format_real(s.std));
    }
    rrow.push_back(std::to_string(cfg.repeats));
    rec_t.rows.push_back(std::move(rrow));
    const MeanStd ts = mean_std(seconds);
    time_t.rows.push_back({cfg.dataset.name, model, source, format_real(ts.mean),
                           format_real(ts.std), std::to_string(cfg.repeats)});
  }
  return {attack_t, rec_t, time_t};
}

// Histograms, overlap scores, PCA scatter and variance statistics for each
// source of repeat 0.
inline std::vector<analysis::CsvTable> analysis_tables(Run& run) {
  const auto& cfg = run.config();
  const AttributeTable& labels = run.labels();
  std::vector<analysis::CsvTable> out;
  analysis::CsvTable overlap_t{"analysis/overlap.csv", {"method", "dim", "overlap"}, {}};
  analysis::CsvTable stats_t{"analysis/embedding_stats.csv",
                             {"method", "mean_variance", "mean_overlap", "frob_dist_from_original"},
                             {}};
  Matrix original;
  for (const auto& source : run.sources()) {
    const fs::path dir = run.source_dir(0, source);
    Run::require(dir / "meta.txt", producer_of(source));
    const Matrix theta = recsys::load_checkpoint(dir / "embedding.ckpt").user_emb;
    if (source == kOriginal) original = theta;
    const auto hist = analysis::embedding_histograms(theta, labels, cfg.analysis.bins,
                                                     cfg.analysis.downsample, cfg.repeat_seed(0));
    const auto overlap = analysis::overlap_score(hist);
    out.push_back(analysis::histogram_table(hist, str_cat("analysis/histograms_", source, ".csv")));
    for (std::size_t k = 0; k < overlap.per_dimension.size(); ++k) {
      overlap_t.rows.push_back({source, std::to_string(k), format_real(overlap.per_dimension[k])});
    }
    overlap_t.rows.push_back({source, "mean", format_real(overlap.mean)});
    const auto proj = analysis::pca_project(theta, cfg.analysis.projection_dims);
    out.push_back(analysis::projection_table(proj, labels, str_cat("analysis/projection_", source, ".csv")));
    const Matrix centered = theta.rowwise() - theta.colwise().mean();
    const double mean_var = centered.squaredNorm() / static_cast<double>(theta.rows() - 1) /
                            static_cast<double>(theta.cols());
    stats_t.rows.push_back({source, format_real(mean_var), format_real(overlap.mean),
                            format_real((theta - original).norm())});
  }
  out.push_back(std::move(overlap_t));
  out.push_back(std::move(stats_t));
  return out;
}

inline void cmd_report(Run& run) {
  run.unit("report", "tables", fs::path(), [&] {
    auto tables = summary_tables(run);
    auto more = analysis_tables(run);
    tables.insert(tables.end(), more.begin(), more.end());
    for (const auto& t : tables) analysis::write_text_file(run.out() / t.file, t.render());
  });
}

inline void cmd_sweep(Run& run) {
  const auto& cfg = run.config();
  const fs::path target = run.analysis_dir() / "alpha_sweep.csv";
  run.unit("sweep", unlearn::to_string(cfg.sweep.loss), target, [&] {
    const fs::path src = run.source_dir(0, kOriginal) / "embedding.ckpt";
    Run::require(src, "train");
    const auto model = recsys::load_checkpoint(src);
    analysis::SweepConfig sc;
    sc.unlearn = unlearn::UnlearnConfig::defaults(cfg.sweep.loss);
    for (const auto& u : cfg.unlearn) {
      if (u.loss_kind == cfg.sweep.loss) sc.unlearn = u;
    }
    sc.unlearn.seed = cfg.repeat_seed(0);
    sc.attack = cfg.attack;
    sc.attack.seed = cfg.repeat_seed(0);
    sc.threads = cfg.worker_threads();
    const auto rows = analysis::alpha_sweep(model.user_emb, run.labels(), run.dataset(), model,
                                            cfg.sweep.alphas, sc);
    analysis::write_text_file(target, analysis::sweep_table(rows).render());
  });
}

inline void cmd_pipeline(Run& run) {
  cmd_prepare(run);
  cmd_train(run);
  cmd_unlearn(run);
  cmd_attack(run);
  cmd_eval(run);
  cmd_report(run);
}

// manifest.json: config hash, per-repeat seeds, the units handled by the
// latest command with their status and time, and every file in the run
// directory with its size and content hash.
inline void write_manifest(Run& run, const std::string& command) {
  const auto& cfg = run.config();
  Json doc;
  doc["command"] = command;
  doc["config_hash"] = config_hash(cfg);
  Json seeds = Json::array();
  for (int i = 0; i < cfg.repeats; ++i) seeds.push_back(cfg.repeat_seed(i));
  doc["seeds"] = seeds;
  Json units = Json::array();
  for (const auto& r : run.records()) {
    units.push_back(Json{{"stage", r.stage},
                         {"unit", r.unit},
                         {"status", r.computed ? "computed" : "skipped"},
                         {"seconds", r.seconds}});
  }
  doc["units"] = units;
  std::vector<fs::path> files;
  if (fs::exists(run.out())) {
    for (const auto& entry : fs::recursive_directory_iterator(run.out())) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), run.out());
      if (rel == "manifest.json" || rel.extension() == ".tmp") continue;
      files.push_back(rel);
    }
  }
  std::sort(files.begin(), files.end());
  Json listing = Json::array();
  for (const auto& rel : files) {
    std::ifstream in(run.out() / rel, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    listing.push_back(Json{{"path", rel.generic_string()},
                           {"bytes", bytes.size()},
                           {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  doc["files"] = listing;
  analysis::write_text_file(run.out() / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace attrunlearn::cli
