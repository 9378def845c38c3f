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

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/experiment.hpp"
#include "ifnmtpp/io_util.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace ifnmtpp;
using nlohmann::json;

namespace {

ExperimentConfig small_config(const std::filesystem::path& out, const std::string& process = "hawkes_1") {
  auto cfg = ExperimentConfig::defaults();
  cfg.out = out;
  cfg.process = process;
  cfg.seed = 7;
  cfg.sizes = {30, 8, 6, 15};
  cfg.apply_tiny();
  cfg.set_steps(60);
  cfg.train.batch_size = 8;
  cfg.train.eval_every = 20;
  cfg.sample.n_samples = 10;
  cfg.rare_marks = {3, 4};
  cfg.max_eval_prefixes = 40;
  cfg.max_calibration_prefixes = 40;
  cfg.fidelity.max_prefixes = 5;
  cfg.fidelity.grid_points = 64;
  return cfg;
}

// Runs the whole pipeline once and shares the directory between cases.
const ExperimentConfig& pipeline() {
  static const ExperimentConfig cfg = [] {
    auto c = small_config(ifnmtpp::testing::scratch_dir("pipeline"));
    write_file_atomic(c.out / "config.json", config_to_json(c));
    cmd_generate(c);
    cmd_preprocess(c);
    cmd_train(c);
    cmd_calibrate(c);
    cmd_evaluate(c);
    return c;
  }();
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IFNMTPP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  CHECK_NOTHROW(config_from_json("{}"));
  CHECK_THROWS_AS(config_from_json(R"({"sed": 3})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"train": {"stpes": 3}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"model": {"history_dim": 0}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"process": "lorenz"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);

  const auto c = config_from_json(R"({"seed": 3, "train": {"steps": 500}, "rare_marks": [1, 2]})");
  CHECK(c.seed == 3);
  CHECK(c.train.total_steps == 500);
  CHECK(c.train.warmup_steps == 100);
  CHECK(c.rare_marks == std::vector<MarkId>{1, 2});

  // Round trip through the writer.
  auto d = small_config("somewhere");
  const auto back = config_from_json(config_to_json(d));
  CHECK(config_to_json(back) == config_to_json(d));
  CHECK(back.shape.resolved_embedding_dim() == d.shape.resolved_embedding_dim());
  CHECK(back.shape.input_dim == d.shape.input_dim);
  CHECK(back.train.total_steps == 60);
}

TEST_CASE("defaults") {
  const auto d = ExperimentConfig::defaults();
  CHECK(d.shape.history_dim == 32);
  CHECK(d.shape.input_dim == 64);
  CHECK(d.shape.num_layers == 3);
  CHECK(d.train.total_steps == 100000);
  CHECK(d.train.warmup_steps == 20000);
  CHECK(d.train.batch_size == 32);
  CHECK(d.train.learning_rate == 0.002);
  CHECK(d.sample.n_samples == 100);
  CHECK(d.sample.u_max == 0.9);
  auto t = d;
  t.apply_tiny();
  CHECK(t.shape.history_dim == 8);
  CHECK(t.shape.input_dim == 8);
  CHECK(t.shape.num_layers == 2);
  CHECK(t.train.total_steps == 2000);
}

TEST_CASE("generate is deterministic and sized by default") {
  auto a = small_config(ifnmtpp::testing::scratch_dir("gen_a"), "poisson");
  auto b = small_config(ifnmtpp::testing::scratch_dir("gen_b"), "poisson");
  cmd_generate(a);
  cmd_generate(b);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    CHECK(read_file(a.raw_path(s)) == read_file(b.raw_path(s)));
  }

  auto full = ExperimentConfig::defaults();
  full.process = "hawkes_1";
  full.out = ifnmtpp::testing::scratch_dir("gen_full");
  const auto splits = cmd_generate(full);
  CHECK(splits.train.sequences.size() + splits.val.sequences.size() + splits.test.sequences.size() == 2800);
  CHECK(load_jsonl(full.raw_path(Split::kTest).string()).sequences.size() == 400);
}

TEST_CASE("preprocess writes statistics") {
  auto c = small_config(ifnmtpp::testing::scratch_dir("prep"), "renewal");
  c.normalize = true;
  cmd_generate(c);
  const auto stats = cmd_preprocess(c);
  const auto j = json::parse(read_file(c.stats_path()));
  CHECK(j.at("mean").get<double>() == stats.mean);
  CHECK(j.at("std").get<double>() == stats.std);
  CHECK(stats.std > 0.0);
  const auto prepped = load_jsonl(c.prep_path(Split::kTrain).string());
  const auto raw = load_jsonl(c.raw_path(Split::kTrain).string());
  CHECK(prepped.sequences[0].events[3].time == doctest::Approx(stats.apply(raw.sequences[0].events[3].time)));
}

TEST_CASE("checkpoint round trip") {
  const auto& c = pipeline();
  const auto text = read_file(c.checkpoint_path());
  const auto ckpt = load_checkpoint(c.checkpoint_path().string());
  CHECK(checkpoint_to_json(ckpt) == text);
  const auto again = checkpoint_from_json(checkpoint_to_json(ckpt));
  CHECK(again.model.parameters() == ckpt.model.parameters());
  CHECK(again.model.shape() == ckpt.model.shape());
  CHECK(again.stats == ckpt.stats);

  const auto val = load_jsonl(c.prep_path(Split::kVal).string());
  const double before = eval_nll(val, ckpt.model.materialize());
  CHECK(std::abs(eval_nll(val, again.model.materialize()) - before) <= 1e-12);

  // Retraining from the same seed lands on the same model.
  auto twin = c;
  twin.out = ifnmtpp::testing::scratch_dir("pipeline_twin");
  std::filesystem::create_directories(twin.out);
  std::filesystem::copy(c.out / "data", twin.out / "data", std::filesystem::copy_options::recursive);
  cmd_preprocess(twin);
  const auto r = cmd_train(twin);
  CHECK(r.model.parameters() == ckpt.model.parameters());

  CHECK_THROWS_AS(checkpoint_from_json(R"({"format": "other"})"), DataError);
  auto j = json::parse(text);
  j["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(j.dump()), DataError);
}

TEST_CASE("calibration files") {
  const auto& c = pipeline();
  const auto first = read_file(c.thresholds_path());
  const auto j = json::parse(first);
  for (const char* key : {"prior", "epsilon", "f1"}) {
    REQUIRE(j.contains(key));
    CHECK(j.at(key).size() == 5);
  }
  // Idempotent rerun.
  cmd_calibrate(c);
  CHECK(read_file(c.thresholds_path()) == first);

  // Matches an in-process calibration on every training prefix.
  const auto ckpt = load_checkpoint(c.checkpoint_path().string());
  const auto train = load_jsonl(c.prep_path(Split::kTrain).string());
  const auto prior = compute_prior(train);
  const auto refs = select_prefixes(train, 0, 0);
  const auto set = mark_first_scores(ckpt.model.materialize(), train, prior, refs);
  const auto table = calibrate(set.ratios, set.labels, prior);
  CHECK(thresholds_to_json(table) == first);
}

TEST_CASE("evaluation report") {
  const auto& c = pipeline();
  const auto j = json::parse(read_file(c.out / "report.json"));
  REQUIRE(j.contains("methods"));
  CHECK(j.at("methods").size() == 4);
  for (const auto& method : EvaluationReport::methods()) {
    REQUIRE(j.at("methods").contains(method));
    const auto& m = j.at("methods").at(method);
    CHECK(m.size() == 3);
    for (const auto& subset : EvaluationReport::subsets()) {
      REQUIRE(m.contains(subset));
      CHECK(m.at(subset).size() == 3);
      for (const char* metric : {"macro_f1", "micro_f1", "mae"}) CHECK(m.at(subset).contains(metric));
    }
  }
  CHECK(j.contains("nll"));
  CHECK(std::isfinite(j.at("nll").get<double>()));
  std::istringstream csv(read_file(c.out / "report.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1 + 4 * 3 + 1);  // header, cells, nll
}

TEST_CASE("zero thresholds with a uniform prior reproduce the plain rows") {
  const auto& c = pipeline();
  const auto ckpt = load_checkpoint(c.checkpoint_path().string());
  const auto test = load_jsonl(c.prep_path(Split::kTest).string());
  const auto zero = ThresholdTable::zero(std::vector<double>(5, 0.2));
  const auto refs = select_prefixes(test, 30, 1);
  const auto preds = predict(ckpt.model.materialize(), ckpt.stats, test, zero, zero, c.sample, refs);
  for (const auto& p : preds) {
    CHECK(p.mark == p.mark_plain);
    CHECK(p.tm_mark == p.tm_mark_plain);
  }
  const auto report = evaluate_predictions(preds, partition_marks(5, std::vector<MarkId>{3, 4}), 5, 0.0);
  for (const auto& subset : EvaluationReport::subsets()) {
    const auto& a = report.at("ours", subset);
    const auto& b = report.at("ours-w/o-thresholding", subset);
    CHECK(((a.macro_f1 == b.macro_f1) || (std::isnan(a.macro_f1) && std::isnan(b.macro_f1))));
    CHECK(((a.micro_f1 == b.micro_f1) || (std::isnan(a.micro_f1) && std::isnan(b.micro_f1))));
    const auto& x = report.at("time-mark-with-thresholding", subset);
    const auto& y = report.at("time-mark-w/o-thresholding", subset);
    CHECK(((x.macro_f1 == y.macro_f1) || (std::isnan(x.macro_f1) && std::isnan(y.macro_f1))));
  }
}

TEST_CASE("fidelity outputs") {
  const auto& c = pipeline();
  const auto self = cmd_fidelity(c, true);
  CHECK(self.spearman == doctest::Approx(1.0));
  CHECK(self.l1 <= 1e-6);
  CHECK(self.relative_nll <= 1e-9);
  const auto r = cmd_fidelity(c);
  CHECK(r.num_prefixes == 5);
  const auto j = json::parse(read_file(c.out / "fidelity.json"));
  for (const char* key : {"spearman", "l1", "relative_nll"}) CHECK(j.contains(key));
  std::istringstream csv(read_file(c.out / "fidelity_curves.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1 + 64 * 5);
}

TEST_CASE("command line matches the library") {
  const auto& c = pipeline();
  const auto cfg_path = (c.out / "config.json").string();
  const auto lib = read_file(c.thresholds_path());
  const auto lib_report = read_file(c.out / "report.json");
  std::filesystem::remove(c.thresholds_path());
  CHECK(run_cli("calibrate --config " + cfg_path) == 0);
  CHECK(read_file(c.thresholds_path()) == lib);
  CHECK(run_cli("evaluate --config " + cfg_path) == 0);
  CHECK(read_file(c.out / "report.json") == lib_report);
}

TEST_CASE("exit codes") {
  const auto dir = ifnmtpp::testing::scratch_dir("exit_codes");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("generate --process lorenz") == 2);
  CHECK(run_cli("train --steps -5") == 2);
  write_file_atomic(dir / "bad.json", R"({"bogus": 1})");
  CHECK(run_cli("train --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("preprocess --out " + dir.string() + " --train " + (dir / "none.jsonl").string() + " --val " +
                (dir / "none.jsonl").string() + " --test " + (dir / "none.jsonl").string()) == 3);
  write_file_atomic(dir / "broken.jsonl", "{\"events\": [[0, 2.0], [1, 1.0]]}\n");
  CHECK(run_cli("preprocess --out " + dir.string() + " --train " + (dir / "broken.jsonl").string() + " --val " +
                (dir / "broken.jsonl").string() + " --test " + (dir / "broken.jsonl").string()) == 3);
  CHECK(run_cli("generate --process poisson --seed 7 --out " + (dir / "g").string()) == 0);
  CHECK(std::filesystem::exists(dir / "g" / "data" / "train.jsonl"));
}
