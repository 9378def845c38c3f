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

// Classification, time-prediction and density-fidelity metrics.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/density.hpp"
#include "ifnmtpp/model.hpp"
#include "ifnmtpp/synthgen.hpp"

namespace ifnmtpp {

struct ConfusionCounts {
  std::vector<long> tp, fp, fn;

  int num_marks() const { return static_cast<int>(tp.size()); }
};

/// One-vs-rest counts over the whole prediction stream.
ConfusionCounts confusion_counts(std::span<const MarkId> preds, std::span<const MarkId> labels, int num_marks);

/// 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(long tp, long fp, long fn);

/// Unweighted mean of per-mark F1 over `subset`.
double macro_f1(std::span<const MarkId> preds, std::span<const MarkId> labels, std::span<const MarkId> subset);
/// F1 of TP/FP/FN pooled over `subset`.
double micro_f1(std::span<const MarkId> preds, std::span<const MarkId> labels, std::span<const MarkId> subset);

/// Mean |t - t_pred| over the events whose true mark is m; NaN for marks with
/// no events.
std::vector<double> mae_per_mark(std::span<const double> pred_times, std::span<const double> true_times,
                                 std::span<const MarkId> true_marks, int num_marks);
/// Geometric mean of per-mark MAE over the marks of `subset` that occur.
double mae_geometric(std::span<const double> pred_times, std::span<const double> true_times,
                     std::span<const MarkId> true_marks, std::span<const MarkId> subset);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);

/// Trapezoidal integral of |f - g| over a strictly increasing grid.
double l1_distance(std::span<const double> f, std::span<const double> g, std::span<const double> grid);

/// Offsets in (0, horizon]: `n / 10` evenly spaced points up to horizon / 10,
/// then geometric spacing up to the horizon.
std::vector<double> fidelity_offsets(double horizon, int n);

struct FidelityConfig {
  int grid_points = 512;
  double mass = 0.99;             ///< oracle probability covered by the grid
  std::size_t max_prefixes = 256; ///< 0 uses every prefix
  std::uint64_t seed = 0;         ///< prefix subsampling
};

struct FidelityCurve {
  std::size_t sequence = 0;
  std::size_t prefix = 0;
  std::vector<double> times, learned, oracle;
};

struct FidelityReport {
  double spearman = 0.0;
  double l1 = 0.0;
  double relative_nll = 0.0;      ///< mean per-event |log p_oracle - log p_model|
  double mean_nll_gap = 0.0;      ///< mean per-event (-log p_model) - (-log p_oracle)
  std::size_t num_prefixes = 0;
  std::size_t num_events = 0;
};

/// Compares `model` with the exact process density on held-out sequences
/// (raw time units). Curves are produced for a seeded subset of prefixes
/// that have a following event; the NLL terms use every event.
FidelityReport fidelity(const DensityModel& model, const ProcessSpec& spec, const Dataset& test,
                        const FidelityConfig& cfg, std::vector<FidelityCurve>* curves = nullptr);

/// Mean per-event -log p(m_i, t_i) on an already normalized dataset.
double eval_nll(const Dataset& ds, const MaterializedModel& weights);

}  // namespace ifnmtpp
