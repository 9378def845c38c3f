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

// Experiment orchestration shared by the command-line tool and the Python
// bindings: configuration, calibration, prediction, evaluation reports and
// the generate / preprocess / train / calibrate / predict / evaluate /
// fidelity workflows.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifnmtpp/checkpoint.hpp"
#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/metrics.hpp"
#include "ifnmtpp/sampling.hpp"
#include "ifnmtpp/synthgen.hpp"
#include "ifnmtpp/thresholding.hpp"
#include "ifnmtpp/training.hpp"

namespace ifnmtpp {

enum class Resampling { kNone, kOversample, kUndersample };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/default";

  std::string process;  ///< synthetic preset; empty when data paths are given
  SplitSizes sizes;
  std::vector<double> mark_probs;

  std::filesystem::path train_path, val_path, test_path;  ///< raw data; default under out/data
  std::optional<bool> normalize;  ///< unset: off for synthetic data, on otherwise
  Resampling resample = Resampling::kNone;

  ModelShape shape;           ///< num_marks is taken from the data
  TrainConfig train;
  bool warmup_explicit = false;  ///< otherwise warmup is a fifth of the steps
  SampleConfig sample;
  std::vector<MarkId> rare_marks;
  std::size_t max_eval_prefixes = 1000;         ///< 0 evaluates every test prefix
  std::size_t max_calibration_prefixes = 1000;  ///< time-first table only; 0 = all
  FidelityConfig fidelity;

  /// Paper-scale defaults: widths 32/64/3, 100000 steps, 20000 warmup steps.
  static ExperimentConfig defaults();
  /// Widths 8/8/2 and 2000 steps.
  void apply_tiny();
  void set_steps(int steps);
  bool normalized() const { return normalize.value_or(process.empty()); }
  std::optional<ProcessSpec> process_spec() const;
  void validate() const;
  /// Field checks only; a config file may leave the data source to flags.
  void validate_settings() const;

  std::filesystem::path raw_path(Split split) const;
  std::filesystem::path prep_path(Split split) const;
  std::filesystem::path stats_path() const { return out / "prep" / "stats.json"; }
  std::filesystem::path checkpoint_path() const { return out / "model" / "checkpoint.json"; }
  std::filesystem::path history_path() const { return out / "model" / "train_history.csv"; }
  std::filesystem::path thresholds_path() const { return out / "thresholds.json"; }
  std::filesystem::path time_mark_thresholds_path() const { return out / "thresholds_time_mark.json"; }
};

/// Strict: unknown keys raise ConfigError.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = ExperimentConfig::defaults());
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct PrefixRef {
  std::size_t sequence = 0;
  std::size_t prefix = 0;  ///< number of observed events; predicts event `prefix`

  friend bool operator==(const PrefixRef&, const PrefixRef&) = default;
  friend auto operator<=>(const PrefixRef&, const PrefixRef&) = default;
};

/// Every prefix followed by an event, or a seeded sorted subset of `cap`.
std::vector<PrefixRef> select_prefixes(const Dataset& ds, std::size_t cap, std::uint64_t seed);

/// Per-prefix ratio rows and true next marks for the mark-first order.
struct CalibrationSet {
  std::vector<std::vector<double>> ratios;
  std::vector<MarkId> labels;
};

CalibrationSet mark_first_scores(const MaterializedModel& w, const Dataset& ds, std::span<const double> prior,
                                 std::span<const PrefixRef> prefixes);
/// Ratios of p(m | t_pred) where t_pred is the sampled mean of p(t).
CalibrationSet time_mark_scores(const MaterializedModel& w, const Dataset& ds, std::span<const double> prior,
                                std::span<const PrefixRef> prefixes, const SampleConfig& sample);

struct PrefixPrediction {
  PrefixRef ref;
  MarkId true_mark = 0;
  double true_time = 0.0;     ///< raw units
  MarkId mark = 0;            ///< thresholded, mark first
  MarkId mark_plain = 0;      ///< argmax p(m)
  double time_pred_mark = 0;  ///< mean of p(t | mark)
  double time_true_mark = 0;  ///< mean of p(t | true mark)
  double time_marginal = 0;   ///< mean of p(t)
  MarkId tm_mark = 0;         ///< thresholded p(m | time_marginal)
  MarkId tm_mark_plain = 0;   ///< argmax p(m | time_marginal)
};

struct PredictOptions {
  bool times = true;  ///< false skips sampling; time fields stay 0 and time-first marks copy mark-first ones
};

/// `test` is normalized; predicted times are returned in raw units.
std::vector<PrefixPrediction> predict(const MaterializedModel& w, const NormalizationStats& stats,
                                      const Dataset& test, const ThresholdTable& mark_first,
                                      const ThresholdTable& time_mark, const SampleConfig& sample,
                                      std::span<const PrefixRef> prefixes, PredictOptions options = {});
std::string predictions_csv(const std::vector<PrefixPrediction>& preds);

struct MethodScores {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double mae = 0.0;
};

struct EvaluationReport {
  static const std::vector<std::string>& methods();  ///< ours, ours-w/o-thresholding, time-mark-...
  static const std::vector<std::string>& subsets();  ///< M, M_r, M_f
  /// cells[method][subset]; NaN for an empty subset.
  std::vector<std::vector<MethodScores>> cells;
  double nll = 0.0;
  std::size_t num_prefixes = 0;

  const MethodScores& at(const std::string& method, const std::string& subset) const;
  std::string to_json() const;
  std::string to_csv() const;
};

EvaluationReport evaluate_predictions(const std::vector<PrefixPrediction>& preds, const MarkPartition& partition,
                                      int num_marks, double nll);

std::string fidelity_to_json(const FidelityReport& r);
std::string fidelity_curves_csv(const std::vector<FidelityCurve>& curves);

// Workflows. Each reads its inputs from and writes its outputs under cfg.out.
GeneratedSplits cmd_generate(const ExperimentConfig& cfg);
NormalizationStats cmd_preprocess(const ExperimentConfig& cfg);
TrainResult cmd_train(const ExperimentConfig& cfg);
std::pair<ThresholdTable, ThresholdTable> cmd_calibrate(const ExperimentConfig& cfg);
std::vector<PrefixPrediction> cmd_predict(const ExperimentConfig& cfg);
EvaluationReport cmd_evaluate(const ExperimentConfig& cfg);
/// With `oracle_self_test` the exact process density stands in for the model.
FidelityReport cmd_fidelity(const ExperimentConfig& cfg, bool oracle_self_test = false);

}  // namespace ifnmtpp
