// Copyright 2026 The ifnmtpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string process;
  std::optional<int> steps;
  std::string out;
  bool tiny = false;
  std::string train, val, test;
  std::vector<int> rare;
  bool oracle = false;
  bool with_fidelity = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--process", f.process, "Synthetic process")
      ->check(CLI::IsMember({"hawkes_1", "hawkes_2", "poisson", "self_correct", "renewal"}));
  cmd->add_option("--steps", f.steps, "Training steps")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--tiny", f.tiny, "Small widths and 2000 steps");
  cmd->add_option("--train", f.train, "Raw training split (JSONL)");
  cmd->add_option("--val", f.val, "Raw validation split (JSONL)");
  cmd->add_option("--test", f.test, "Raw test split (JSONL)");
  cmd->add_option("--rare", f.rare, "Rare mark ids");
}

ifnmtpp::ExperimentConfig resolve(const Flags& f) {
  auto cfg = f.config.empty() ? ifnmtpp::ExperimentConfig::defaults() : ifnmtpp::load_config(f.config);
  if (f.tiny) cfg.apply_tiny();
  if (f.seed) cfg.seed = *f.seed;
  if (!f.process.empty()) cfg.process = f.process;
  if (f.steps) cfg.set_steps(*f.steps);
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.train.empty()) cfg.train_path = f.train;
  if (!f.val.empty()) cfg.val_path = f.val;
  if (!f.test.empty()) cfg.test_path = f.test;
  if (!f.rare.empty()) cfg.rare_marks = f.rare;
  cfg.validate();
  return cfg;
}

void print_report(const ifnmtpp::EvaluationReport& r) { std::cout << r.to_json(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marked temporal point process toolkit"};
  app.require_subcommand(1);
  Flags f;
  std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "Simulate train/val/test splits"},
      {"preprocess", "Normalize splits and write stats"},
      {"train", "Fit the model"},
      {"calibrate", "Learn per-mark thresholds"},
      {"predict", "Write next-event predictions"},
      {"evaluate", "Write the evaluation report"},
      {"fidelity", "Compare learned and true densities"},
      {"run", "generate (when synthetic) through evaluate"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_common(subs[name], f);
  }
  subs["fidelity"]->add_flag("--oracle", f.oracle, "Use the true density as the model");
  subs["run"]->add_flag("--fidelity", f.with_fidelity, "Also run the fidelity comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(f);
    using namespace ifnmtpp;
    if (subs["generate"]->parsed()) {
      const auto s = cmd_generate(cfg);
      std::cout << "wrote " << s.train.sequences.size() + s.val.sequences.size() + s.test.sequences.size()
                << " sequences to " << (cfg.out / "data").string() << '\n';
    } else if (subs["preprocess"]->parsed()) {
      const auto stats = cmd_preprocess(cfg);
      std::cout << stats_to_json(stats);
    } else if (subs["train"]->parsed()) {
      const auto r = cmd_train(cfg);
      std::cout << "best step " << r.best_step << " val nll " << r.best_val_nll << '\n';
    } else if (subs["calibrate"]->parsed()) {
      const auto [mf, tm] = cmd_calibrate(cfg);
      std::cout << thresholds_to_json(mf);
    } else if (subs["predict"]->parsed()) {
      const auto p = cmd_predict(cfg);
      std::cout << "wrote " << p.size() << " predictions\n";
    } else if (subs["evaluate"]->parsed()) {
      print_report(cmd_evaluate(cfg));
    } else if (subs["fidelity"]->parsed()) {
      std::cout << fidelity_to_json(cmd_fidelity(cfg, f.oracle));
    } else if (subs["run"]->parsed()) {
      if (!cfg.process.empty() && cfg.train_path.empty()) cmd_generate(cfg);
      cmd_preprocess(cfg);
      cmd_train(cfg);
      cmd_calibrate(cfg);
      print_report(cmd_evaluate(cfg));
      if (f.with_fidelity) std::cout << fidelity_to_json(cmd_fidelity(cfg, false));
    }
  } catch (const ifnmtpp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
