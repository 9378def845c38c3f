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

#include "ifnmtpp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/log.hpp"
#include "ifnmtpp/training.hpp"

namespace ifnmtpp {

ConfusionCounts confusion_counts(std::span<const MarkId> preds, std::span<const MarkId> labels, int num_marks) {
  if (preds.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
  ConfusionCounts c;
  c.tp.assign(static_cast<std::size_t>(num_marks), 0);
  c.fp = c.fn = c.tp;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto p = preds[i], y = labels[i];
    if (p < 0 || p >= num_marks || y < 0 || y >= num_marks) throw std::invalid_argument("mark out of range");
    if (p == y) {
      ++c.tp[static_cast<std::size_t>(p)];
    } else {
      ++c.fp[static_cast<std::size_t>(p)];
      ++c.fn[static_cast<std::size_t>(y)];
    }
  }
  return c;
}

double f1_score(long tp, long fp, long fn) {
  const long den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

namespace {

int span_marks(std::span<const MarkId> preds, std::span<const MarkId> labels, std::span<const MarkId> subset) {
  if (subset.empty()) throw std::invalid_argument("empty mark subset");
  MarkId top = 0;
  for (auto v : preds) top = std::max(top, v);
  for (auto v : labels) top = std::max(top, v);
  for (auto v : subset) {
    if (v < 0) throw std::invalid_argument("negative mark in subset");
    top = std::max(top, v);
  }
  return top + 1;
}

}  // namespace

double macro_f1(std::span<const MarkId> preds, std::span<const MarkId> labels, std::span<const MarkId> subset) {
  const auto c = confusion_counts(preds, labels, span_marks(preds, labels, subset));
  double sum = 0.0;
  for (auto m : subset) {
    const auto i = static_cast<std::size_t>(m);
    sum += f1_score(c.tp[i], c.fp[i], c.fn[i]);
  }
  return sum / static_cast<double>(subset.size());
}

double micro_f1(std::span<const MarkId> preds, std::span<const MarkId> labels, std::span<const MarkId> subset) {
  const auto c = confusion_counts(preds, labels, span_marks(preds, labels, subset));
  long tp = 0, fp = 0, fn = 0;
  for (auto m : subset) {
    const auto i = static_cast<std::size_t>(m);
    tp += c.tp[i];
    fp += c.fp[i];
    fn += c.fn[i];
  }
  return f1_score(tp, fp, fn);
}

std::vector<double> mae_per_mark(std::span<const double> pred_times, std::span<const double> true_times,
                                 std::span<const MarkId> true_marks, int num_marks) {
  if (pred_times.size() != true_times.size() || true_times.size() != true_marks.size()) {
    throw std::invalid_argument("MAE inputs differ in length");
  }
  std::vector<double> sum(static_cast<std::size_t>(num_marks), 0.0);
  std::vector<std::size_t> n(static_cast<std::size_t>(num_marks), 0);
  for (std::size_t i = 0; i < true_marks.size(); ++i) {
    const auto m = true_marks[i];
    if (m < 0 || m >= num_marks) throw std::invalid_argument("mark out of range");
    sum[static_cast<std::size_t>(m)] += std::abs(true_times[i] - pred_times[i]);
    ++n[static_cast<std::size_t>(m)];
  }
  for (std::size_t m = 0; m < sum.size(); ++m) {
    sum[m] = n[m] == 0 ? std::numeric_limits<double>::quiet_NaN() : sum[m] / static_cast<double>(n[m]);
  }
  return sum;
}

double mae_geometric(std::span<const double> pred_times, std::span<const double> true_times,
                     std::span<const MarkId> true_marks, std::span<const MarkId> subset) {
  if (subset.empty()) throw std::invalid_argument("empty mark subset");
  MarkId top = 0;
  for (auto m : true_marks) top = std::max(top, m);
  for (auto m : subset) top = std::max(top, m);
  const auto mae = mae_per_mark(pred_times, true_times, true_marks, top + 1);
  double log_sum = 0.0;
  std::size_t used = 0;
  for (auto m : subset) {
    const double v = mae[static_cast<std::size_t>(m)];
    if (std::isnan(v)) {
      warn("mark " + std::to_string(m) + " has no events and is left out of the MAE");
      continue;
    }
    if (v == 0.0) return 0.0;
    log_sum += std::log(v);
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(log_sum / static_cast<double>(used));
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw NumericError("spearman: NaN input");
  }
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("spearman: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

double l1_distance(std::span<const double> f, std::span<const double> g, std::span<const double> grid) {
  if (grid.size() < 2) throw std::invalid_argument("l1_distance: grid needs two points");
  if (f.size() != grid.size() || g.size() != grid.size()) throw std::invalid_argument("l1_distance: length mismatch");
  double total = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid[i] - grid[i - 1];
    if (!(h > 0.0)) throw std::invalid_argument("l1_distance: grid must be strictly increasing");
    total += 0.5 * h * (std::abs(f[i - 1] - g[i - 1]) + std::abs(f[i] - g[i]));
  }
  return total;
}

std::vector<double> fidelity_offsets(double horizon, int n) {
  if (!(horizon > 0.0) || n < 2) throw std::invalid_argument("fidelity grid needs a positive horizon and two points");
  const int head = std::max(1, n / 10);
  const int tail = n - head;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  const double split = 0.1 * horizon;
  for (int k = 1; k <= head; ++k) out.push_back(split * k / head);
  for (int k = 1; k <= tail; ++k) out.push_back(split * std::pow(10.0, static_cast<double>(k) / tail));
  out.back() = horizon;
  return out;
}

FidelityReport fidelity(const DensityModel& model, const ProcessSpec& spec, const Dataset& test,
                        const FidelityConfig& cfg, std::vector<FidelityCurve>* curves) {
  if (model.num_marks() != spec.n_marks) throw ConfigError("model and process disagree on the number of marks");
  if (!(cfg.mass > 0.0 && cfg.mass < 1.0)) throw ConfigError("fidelity mass must lie in (0, 1)");
  const OracleModel oracle(spec);

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  for (std::size_t s = 0; s < test.sequences.size(); ++s) {
    for (std::size_t k = 0; k < test.sequences[s].size(); ++k) picks.emplace_back(s, k);
  }
  if (cfg.max_prefixes > 0 && picks.size() > cfg.max_prefixes) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(cfg.max_prefixes);
    std::sort(picks.begin(), picks.end());
  }

  FidelityReport r;
  double rho_sum = 0.0, l1_sum = 0.0, abs_sum = 0.0, gap_sum = 0.0;
  std::size_t next_pick = 0;
  for (std::size_t s = 0; s < test.sequences.size(); ++s) {
    const auto& seq = test.sequences[s];
    const auto learned = model.prefixes(seq);
    const auto truth = oracle.prefixes(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto& e = seq.events[i];
      const double lo = truth[i]->log_joint(e.mark, e.time);
      const double lm = learned[i]->log_joint(e.mark, e.time);
      abs_sum += std::abs(lo - lm);
      gap_sum += lo - lm;
      ++r.num_events;
    }
    for (; next_pick < picks.size() && picks[next_pick].first == s; ++next_pick) {
      const std::size_t k = picks[next_pick].second;
      const auto& o = static_cast<const OracleDensity&>(*truth[k]);
      const double t_l = o.t_last();
      const auto offsets = fidelity_offsets(o.quantile(cfg.mass) - t_l, cfg.grid_points);
      FidelityCurve c;
      c.sequence = s;
      c.prefix = k;
      c.times.resize(offsets.size());
      for (std::size_t j = 0; j < offsets.size(); ++j) c.times[j] = t_l + offsets[j];
      c.learned.resize(offsets.size());
      c.oracle.resize(offsets.size());
      learned[k]->marginal(c.times, c.learned);
      o.marginal(c.times, c.oracle);
      rho_sum += spearman(c.learned, c.oracle);
      l1_sum += l1_distance(c.learned, c.oracle, c.times);
      ++r.num_prefixes;
      if (curves) curves->push_back(std::move(c));
    }
  }
  if (r.num_prefixes == 0 || r.num_events == 0) throw DataError("fidelity needs at least one event");
  r.spearman = rho_sum / static_cast<double>(r.num_prefixes);
  r.l1 = l1_sum / static_cast<double>(r.num_prefixes);
  r.relative_nll = abs_sum / static_cast<double>(r.num_events);
  r.mean_nll_gap = gap_sum / static_cast<double>(r.num_events);
  return r;
}

double eval_nll(const Dataset& ds, const MaterializedModel& weights) {
  double total = 0.0;
  std::size_t events = 0;
  for (const auto& seq : ds.sequences) {
    const auto l = sequence_loss(seq, weights);
    total += l.event_term;
    events += l.num_events;
  }
  if (events == 0) throw DataError("dataset has no events");
  return total / static_cast<double>(events);
}

}  // namespace ifnmtpp
