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

// Per-mark decision thresholds over probability ratios r_m = p(m) / prior(m).

#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ifnmtpp/core_data.hpp"

namespace ifnmtpp {

struct ThresholdTable {
  std::vector<double> prior;
  std::vector<double> epsilon;  ///< +inf for marks never predicted by margin
  std::vector<double> f1;       ///< one-vs-rest F1 reached at calibration
  std::vector<bool> usable;     ///< false when prior(m) == 0

  int num_marks() const { return static_cast<int>(prior.size()); }

  /// Zero thresholds, all marks with positive prior usable.
  static ThresholdTable zero(std::vector<double> prior);
  void check() const;
};

/// r_m = p(m) / prior(m). Marks with zero prior get NaN and, unless `quiet`,
/// a warning.
std::vector<double> ratios(std::span<const double> pm, std::span<const double> prior, bool quiet = false);

struct BinaryThreshold {
  double epsilon = std::numeric_limits<double>::infinity();
  double f1 = 0.0;
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
};

/// Best one-vs-rest threshold for a single mark: a score is predicted
/// positive when it exceeds `epsilon`. Candidates are the distinct scores;
/// equal F1 resolves to the smaller threshold. With no positives the result
/// is +inf with F1 = 0.
BinaryThreshold calibrate_binary(std::span<const double> scores, std::span<const bool> positive);

/// `scores` is row-major with one row of r_m per example.
ThresholdTable calibrate(std::span<const std::vector<double>> scores, std::span<const MarkId> labels,
                         std::vector<double> prior);

/// argmax over usable marks of r_m - epsilon_m, ties to the smallest id.
MarkId predict_mark(std::span<const double> r, const ThresholdTable& table);

/// argmax_m p(m), ties to the smallest id.
MarkId predict_mark_plain(std::span<const double> pm);

/// {"prior": [...], "epsilon": [...], "f1": [...], "usable": [...]} with
/// null for an infinite epsilon.
std::string thresholds_to_json(const ThresholdTable& table);
ThresholdTable thresholds_from_json(const std::string& text);
void save_thresholds(const ThresholdTable& table, const std::string& path);
ThresholdTable load_thresholds(const std::string& path);

}  // namespace ifnmtpp
