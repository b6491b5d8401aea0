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

// attrunlearn: command-line driver for the attribute-unlearning experiments.
//
//   attrunlearn --config run.json [--out DIR] [--seed N] [--force] <command>
//
// Commands: prepare, train, unlearn, attack, eval, report, pipeline, sweep.
// Set ATTRUNLEARN_THREADS to cap worker threads.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "attrunlearn/cli/pipeline.hpp"

namespace {

namespace cli = attrunlearn::cli;
namespace fs = std::filesystem;

// Scores one arbitrary checkpoint against the prepared data of a run and
// prints CSV rows to stdout.
void score_checkpoint(cli::Run& run, const std::string& command, const fs::path& ckpt) {
  using namespace attrunlearn;
  const auto model = recsys::load_checkpoint(ckpt);
  const std::string name = ckpt.stem().string();
  const auto& cfg = run.config();
  if (command == "attack") {
    attack::AttackerConfig ac = cfg.attack;
    ac.seed = cfg.repeat_seed(0);
    const auto out = attack::run_attacks(model.user_emb, run.labels(), ac);
    analysis::CsvTable t{"", cli::kAttackHeader, {}};
    t.rows.push_back(cli::attack_row(run, name, attack::AttackerKind::kMlp, out.mlp, ac.seed));
    t.rows.push_back(cli::attack_row(run, name, attack::AttackerKind::kGbt, out.gbt, ac.seed));
    std::cout << t.render();
    return;
  }
  const auto rep = recsys::eval_ranking(model, run.dataset(), cfg.cutoffs);
  analysis::CsvTable t{"", cli::eval_header(cfg.cutoffs), {}};
  std::vector<std::string> row = {cfg.dataset.name, recsys::to_string(model.kind), name};
  for (int k : cfg.cutoffs) row.push_back(format_real(rep.ndcg.at(k)));
  for (int k : cfg.cutoffs) row.push_back(format_real(rep.hr.at(k)));
  row.push_back(std::to_string(rep.users_evaluated));
  row.push_back(std::to_string(cfg.repeat_seed(0)));
  t.rows.push_back(std::move(row));
  std::cout << t.render();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute unlearning for recommender embeddings"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Run directory (overrides output_dir)");
  app.add_option("--seed", seed, "Base seed; repeat i uses seed + i");
  app.add_flag("--force", force, "Recompute outputs that already exist");

  std::string source;
  std::string checkpoint;
  for (const char* name : {"prepare", "train", "unlearn", "report", "pipeline", "sweep"}) {
    app.add_subcommand(name);
  }
  for (const char* name : {"attack", "eval"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--source", source, "original, u2u_r, d2d_r, retrain or all");
    sub->add_option("--checkpoint", checkpoint, "Score this checkpoint and print CSV rows")
        ->check(CLI::ExistingFile);
  }
  app.get_subcommand("prepare")->description("Parse, filter and split the dataset");
  app.get_subcommand("train")->description("Train the recommender once per repeat");
  app.get_subcommand("unlearn")->description("Run every configured unlearning method and the retrain baseline");
  app.get_subcommand("attack")->description("Attribute-inference attacks on each embedding source");
  app.get_subcommand("eval")->description("Ranking metrics for each embedding source");
  app.get_subcommand("report")->description("Averaged tables and embedding diagnostics");
  app.get_subcommand("pipeline")->description("prepare, train, unlearn, attack, eval and report");
  app.get_subcommand("sweep")->description("Alpha sweep on the first repeat's model");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  std::string stage = "config";
  try {
    cli::ExperimentConfig cfg = cli::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (cfg.output_dir.empty()) throw attrunlearn::Error("no output directory: set output_dir or pass --out");
    stage = "setup";
    cli::Run run(cfg, cfg.output_dir, force);
    fs::create_directories(run.out());
    if (!checkpoint.empty()) {
      stage = command;
      score_checkpoint(run, command, checkpoint);
      return 0;
    }
    cli::bind_run_directory(run);
    stage = command;
    if (command == "prepare") cli::cmd_prepare(run);
    else if (command == "train") cli::cmd_train(run);
    else if (command == "unlearn") cli::cmd_unlearn(run);
    else if (command == "attack") cli::cmd_attack(run, source);
    else if (command == "eval") cli::cmd_eval(run, source);
    else if (command == "report") cli::cmd_report(run);
    else if (command == "pipeline") cli::cmd_pipeline(run);
    else if (command == "sweep") cli::cmd_sweep(run);
    stage = "manifest";
    cli::write_manifest(run, command);
  } catch (const cli::StageError& e) {
    std::cerr << "attrunlearn: stage '" << e.stage() << "' failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "attrunlearn: stage '" << stage << "' failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
