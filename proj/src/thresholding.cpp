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

#include "ifnmtpp/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/io_util.hpp"
#include "ifnmtpp/log.hpp"
#include "json.hpp"

namespace ifnmtpp {

ThresholdTable ThresholdTable::zero(std::vector<double> prior) {
  ThresholdTable t;
  const std::size_t m = prior.size();
  t.prior = std::move(prior);
  t.epsilon.assign(m, 0.0);
  t.f1.assign(m, 0.0);
  t.usable.resize(m);
  for (std::size_t i = 0; i < m; ++i) t.usable[i] = t.prior[i] > 0.0;
  return t;
}

void ThresholdTable::check() const {
  const std::size_t m = prior.size();
  if (m == 0) throw DataError("threshold table has no marks");
  if (epsilon.size() != m || f1.size() != m || usable.size() != m) {
    throw DataError("threshold table fields disagree in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(prior[i] >= 0.0) || !std::isfinite(prior[i])) throw DataError("prior entries must be finite and >= 0");
    if (std::isnan(epsilon[i]) || epsilon[i] == -std::numeric_limits<double>::infinity()) {
      throw DataError("threshold epsilon must be a number or +inf");
    }
    if (usable[i] && prior[i] == 0.0) throw DataError("mark with zero prior cannot be usable");
    sum += prior[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("prior does not sum to one");
}

std::vector<double> ratios(std::span<const double> pm, std::span<const double> prior, bool quiet) {
  if (pm.size() != prior.size()) throw std::invalid_argument("ratios: length mismatch");
  std::vector<double> r(pm.size());
  for (std::size_t m = 0; m < pm.size(); ++m) {
    if (prior[m] > 0.0) {
      r[m] = pm[m] / prior[m];
    } else {
      if (!quiet) warn("mark " + std::to_string(m) + " has zero prior and is excluded");
      r[m] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return r;
}

namespace {

// F1 = 2TP / (2TP + FP + FN), compared exactly as fractions.
bool f1_greater(long tp_a, long den_a, long tp_b, long den_b) {
  // a/den_a > b/den_b with 0/0 read as 0
  if (den_a == 0) return false;
  if (den_b == 0) return tp_a > 0;
  return static_cast<__int128>(tp_a) * den_b > static_cast<__int128>(tp_b) * den_a;
}

}  // namespace

BinaryThreshold calibrate_binary(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("calibrate: length mismatch");
  const long total_pos = std::count(positive.begin(), positive.end(), true);
  BinaryThreshold best;
  best.false_negatives = total_pos;
  if (total_pos == 0) return best;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("calibration score is not finite");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep breakpoints from the highest score down; at each distinct value b
  // everything with score >= b is predicted positive.
  long tp = 0, fp = 0;
  long best_tp = -1, best_den = 0;
  std::size_t best_end = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double b = scores[order[i]];
    while (i < order.size() && scores[order[i]] == b) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const long den = 2 * tp + fp + (total_pos - tp);
    // Later breakpoints are smaller thresholds, so ties move the choice down.
    if (best_tp < 0 || !f1_greater(2 * best_tp, best_den, 2 * tp, den)) {
      best_tp = tp;
      best_den = den;
      best_end = i;
      best.true_positives = tp;
      best.false_positives = fp;
      best.false_negatives = total_pos - tp;
    }
  }
  const double chosen = scores[order[best_end - 1]];
  if (best_end < order.size()) {
    const double next = scores[order[best_end]];
    best.epsilon = chosen + 0.5 * (next - chosen);
    if (!(best.epsilon < chosen && best.epsilon >= next)) best.epsilon = next;
  } else {
    best.epsilon = chosen - std::max(1.0, std::abs(chosen));
  }
  best.f1 = best_den == 0 ? 0.0 : 2.0 * static_cast<double>(best_tp) / static_cast<double>(best_den);
  return best;
}

ThresholdTable calibrate(std::span<const std::vector<double>> scores, std::span<const MarkId> labels,
                         std::vector<double> prior) {
  if (scores.size() != labels.size()) throw std::invalid_argument("calibrate: length mismatch");
  ThresholdTable table = ThresholdTable::zero(std::move(prior));
  const int m_count = table.num_marks();
  for (MarkId y : labels) {
    if (y < 0 || y >= m_count) throw DataError("calibrate: label " + std::to_string(y) + " out of range");
  }
  std::vector<double> column(scores.size());
  std::unique_ptr<bool[]> positive(new bool[scores.size()]);
  for (MarkId m = 0; m < m_count; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (!table.usable[mi]) {
      table.epsilon[mi] = std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != static_cast<std::size_t>(m_count)) {
        throw std::invalid_argument("calibrate: score row has wrong width");
      }
      column[i] = scores[i][mi];
      positive[i] = labels[i] == m;
    }
    const BinaryThreshold bt = calibrate_binary(column, std::span<const bool>(positive.get(), scores.size()));
    if (bt.true_positives + bt.false_negatives == 0) {
      warn("mark " + std::to_string(m) + " has no positive calibration examples; it will not be predicted");
    }
    table.epsilon[mi] = bt.epsilon;
    table.f1[mi] = bt.f1;
  }
  return table;
}

MarkId predict_mark(std::span<const double> r, const ThresholdTable& table) {
  if (r.size() != table.prior.size()) throw std::invalid_argument("predict_mark: length mismatch");
  MarkId best = -1;
  double best_margin = 0.0;
  for (std::size_t m = 0; m < r.size(); ++m) {
    if (!table.usable[m]) continue;
    const double margin = r[m] - table.epsilon[m];
    if (best < 0 || margin > best_margin) {
      best = static_cast<MarkId>(m);
      best_margin = margin;
    }
  }
  if (best < 0) throw DataError("no usable mark to predict");
  return best;
}

MarkId predict_mark_plain(std::span<const double> pm) {
  if (pm.empty()) throw std::invalid_argument("predict_mark_plain: empty input");
  MarkId best = 0;
  for (std::size_t m = 1; m < pm.size(); ++m) {
    if (pm[m] > pm[static_cast<std::size_t>(best)]) best = static_cast<MarkId>(m);
  }
  return best;
}

std::string thresholds_to_json(const ThresholdTable& table) {
  nlohmann::json j;
  j["prior"] = table.prior;
  nlohmann::json eps = nlohmann::json::array();
  for (double e : table.epsilon) {
    if (std::isinf(e)) {
      eps.push_back(nullptr);
    } else {
      eps.push_back(e);
    }
  }
  j["epsilon"] = eps;
  j["f1"] = table.f1;
  j["usable"] = table.usable;
  return j.dump(2) + "\n";
}

ThresholdTable thresholds_from_json(const std::string& text) {
  ThresholdTable t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.prior = j.at("prior").get<std::vector<double>>();
    for (const auto& e : j.at("epsilon")) {
      t.epsilon.push_back(e.is_null() ? std::numeric_limits<double>::infinity() : e.get<double>());
    }
    t.f1 = j.at("f1").get<std::vector<double>>();
    if (j.contains("usable")) {
      t.usable = j.at("usable").get<std::vector<bool>>();
    } else {
      t.usable.resize(t.prior.size());
      for (std::size_t i = 0; i < t.prior.size(); ++i) t.usable[i] = t.prior[i] > 0.0;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed threshold table: ") + e.what());
  }
  t.check();
  return t;
}

void save_thresholds(const ThresholdTable& table, const std::string& path) {
  write_file_atomic(path, thresholds_to_json(table));
}

ThresholdTable load_thresholds(const std::string& path) { return thresholds_from_json(read_file(path)); }

}  // namespace ifnmtpp
