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

#include "ifnmtpp/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/history_encoder.hpp"
#include "ifnmtpp/integral_net.hpp"

namespace ifnmtpp {

namespace {

// log(1 + e^x) without overflow.
inline double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// s(1 - s) for s = 1 / (1 + e^x).
inline double score_slope(double x) {
  return score_from_preactivation(x) * score_from_preactivation(-x);
}

const double kLogFloor = std::log(kDensityFloor);

}  // namespace

LossBreakdown sequence_loss(const EventSequence& seq, const MaterializedModel& weights,
                            EncoderParams* encoder_grad, IemWeights* iem_grad) {
  const bool want_grad = encoder_grad != nullptr && iem_grad != nullptr;
  const EncoderParams& enc = weights.encoder;
  const IemWeights& w = weights.iem;
  const int marks = w.num_marks();
  const auto n = static_cast<Eigen::Index>(seq.size());
  const Eigen::Index states = n + 1;

  const EncoderTrace trace = encode(seq, enc);
  const Eigen::MatrixXd cond = w.conditioning * trace.states;

  // Scores at t_l of every state for every mark; they form the partitions.
  std::vector<IemColumn> last_cols;
  last_cols.reserve(static_cast<std::size_t>(states * marks));
  for (Eigen::Index p = 0; p < states; ++p) {
    for (MarkId m = 0; m < marks; ++m) last_cols.push_back({m, p, 0.0});
  }
  IemPass at_last;
  at_last.forward(w, cond, last_cols, false);

  // Limit of the score at t -> infinity. With every first-layer unit
  // saturating the limit does not depend on the mark or history.
  const bool shared_limit = w.all_units_saturate();
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> saturating;
  IemPass limit;
  if (shared_limit) {
    limit.forward_from_first(w, Eigen::MatrixXd::Ones(w.input_dim(), 1));
  } else {
    Eigen::MatrixXd first = at_last.first_activation();
    for (MarkId m = 0; m < marks; ++m) saturating.push_back(w.saturating_units(m));
    for (Eigen::Index j = 0; j < first.cols(); ++j) {
      const auto& sat = saturating[static_cast<std::size_t>(j % marks)];
      for (Eigen::Index r = 0; r < first.rows(); ++r) {
        if (sat(r)) first(r, j) = 1.0;
      }
    }
    limit.forward_from_first(w, std::move(first));
  }
  const auto limit_x = [&](Eigen::Index col) { return limit.x()(shared_limit ? 0 : col); };

  Eigen::VectorXd partition(states);
  for (Eigen::Index p = 0; p < states; ++p) {
    double z = w.epsilon;
    for (MarkId m = 0; m < marks; ++m) {
      const Eigen::Index j = p * marks + m;
      z += score_from_preactivation(at_last.x()(j)) - score_from_preactivation(limit_x(j));
    }
    if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("non-positive partition function");
    partition(p) = z;
  }

  LossBreakdown loss;
  loss.num_events = static_cast<std::size_t>(n);
  Eigen::VectorXd partition_bar = Eigen::VectorXd::Zero(states);

  IemPass events;
  Eigen::RowVectorXd events_x_bar, events_xd_bar;
  if (n > 0) {
    std::vector<IemColumn> cols;
    cols.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Event& e = seq.events[static_cast<std::size_t>(i)];
      cols.push_back({e.mark, i, e.time - trace.last_times[static_cast<std::size_t>(i)]});
    }
    events.forward(w, cond, cols, true);
    events_x_bar = Eigen::RowVectorXd::Zero(n);
    events_xd_bar = Eigen::RowVectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = events.x()(i);
      const double xd = events.x_dot()(i);
      const double log_p = xd > 0.0 ? -log1pexp(x) - log1pexp(-x) + std::log(xd) - std::log(partition(i))
                                    : -std::numeric_limits<double>::infinity();
      if (!(log_p >= kLogFloor)) {
        loss.event_term -= kLogFloor;
        ++loss.floored;
        continue;
      }
      loss.event_term -= log_p;
      events_x_bar(i) = 1.0 - 2.0 * score_from_preactivation(x);
      events_xd_bar(i) = -1.0 / xd;
      partition_bar(i) += 1.0 / partition(i);
    }
  }

  // Survival from the last event to the horizon.
  IemPass survival;
  Eigen::RowVectorXd survival_x_bar;
  Eigen::VectorXd limit_score_bar_final = Eigen::VectorXd::Zero(marks);
  const double horizon_dt = seq.t_end - trace.last_times.back();
  if (horizon_dt > 0.0) {
    std::vector<IemColumn> cols;
    for (MarkId m = 0; m < marks; ++m) cols.push_back({m, n, horizon_dt});
    survival.forward(w, cond, cols, false);
    double remaining = 0.0;
    for (MarkId m = 0; m < marks; ++m) {
      remaining += score_from_preactivation(survival.x()(m)) -
                   score_from_preactivation(limit_x(n * marks + m));
    }
    const double z = partition(n);
    survival_x_bar = Eigen::RowVectorXd::Zero(marks);
    if (!(remaining / z >= kDensityFloor)) {
      loss.survival_term = -kLogFloor;
    } else {
      loss.survival_term = -std::log(remaining) + std::log(z);
      for (MarkId m = 0; m < marks; ++m) {
        survival_x_bar(m) = score_slope(survival.x()(m)) / remaining;  // ds/dx = -s(1-s)
        limit_score_bar_final(m) = 1.0 / remaining;
      }
      partition_bar(n) += 1.0 / z;
    }
  }
  loss.total = loss.event_term + loss.survival_term;
  if (!want_grad) return loss;

  // Adjoints of the scores at t_l and of the limits.
  const Eigen::Index cols_last = states * marks;
  Eigen::RowVectorXd last_x_bar(cols_last);
  Eigen::RowVectorXd limit_x_bar = Eigen::RowVectorXd::Zero(shared_limit ? 1 : cols_last);
  for (Eigen::Index p = 0; p < states; ++p) {
    for (MarkId m = 0; m < marks; ++m) {
      const Eigen::Index j = p * marks + m;
      double limit_bar = -partition_bar(p);
      if (p == n) limit_bar += limit_score_bar_final(m);
      last_x_bar(j) = -score_slope(at_last.x()(j)) * partition_bar(p);
      limit_x_bar(shared_limit ? 0 : j) += -score_slope(limit_x(j)) * limit_bar;
    }
  }

  Eigen::MatrixXd cond_bar = Eigen::MatrixXd::Zero(cond.rows(), cond.cols());
  if (n > 0) events.backward(w, events_x_bar, &events_xd_bar, *iem_grad, cond_bar);
  if (horizon_dt > 0.0) survival.backward(w, survival_x_bar, nullptr, *iem_grad, cond_bar);
  Eigen::MatrixXd first_bar = limit.backward_from_first(w, limit_x_bar, *iem_grad);
  if (shared_limit) {
    at_last.backward(w, last_x_bar, nullptr, *iem_grad, cond_bar);
  } else {
    for (Eigen::Index j = 0; j < first_bar.cols(); ++j) {
      const auto& sat = saturating[static_cast<std::size_t>(j % marks)];
      for (Eigen::Index r = 0; r < first_bar.rows(); ++r) {
        if (sat(r)) first_bar(r, j) = 0.0;
      }
    }
    at_last.backward(w, last_x_bar, nullptr, *iem_grad, cond_bar, &first_bar);
  }

  iem_grad->conditioning.noalias() += cond_bar * trace.states.transpose();
  const Eigen::MatrixXd states_bar = w.conditioning.transpose() * cond_bar;
  encoder_backward(trace, enc, states_bar, *encoder_grad);
  return loss;
}

LossBreakdown nll_loss(const EventSequence& seq, const IfnmtppModel& model) {
  return sequence_loss(seq, model.materialize());
}

BatchGradient loss_gradients(std::span<const EventSequence* const> batch, const IfnmtppModel& model) {
  if (batch.empty()) throw std::invalid_argument("loss_gradients needs a non-empty batch");
  const MaterializedModel weights = model.materialize();
  EncoderParams eg = weights.encoder.zeros_like();
  IemWeights ig = weights.iem.zeros_like();
  BatchGradient out;
  for (const EventSequence* seq : batch) {
    const LossBreakdown l = sequence_loss(*seq, weights, &eg, &ig);
    out.loss.event_term += l.event_term;
    out.loss.survival_term += l.survival_term;
    out.loss.total += l.total;
    out.loss.num_events += l.num_events;
    out.loss.floored += l.floored;
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.gradient = model.pack_gradient(eg, ig) * scale;
  out.mean_loss = out.loss.total * scale;
  if (!out.gradient.allFinite()) {
    throw NumericError("non-finite gradient (batch mean loss " + std::to_string(out.mean_loss) + ")");
  }
  return out;
}

BatchGradient loss_gradients(std::span<const EventSequence> batch, const IfnmtppModel& model) {
  std::vector<const EventSequence*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_gradients(std::span<const EventSequence* const>(ptrs), model);
}

double dataset_nll(const Dataset& ds, const MaterializedModel& weights) {
  double total = 0.0;
  std::size_t events = 0;
  for (const auto& seq : ds.sequences) {
    const LossBreakdown l = sequence_loss(seq, weights);
    total += l.total;
    events += l.num_events;
  }
  if (events == 0) throw DataError("dataset has no events");
  return total / static_cast<double>(events);
}

void TrainConfig::validate() const {
  if (total_steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be non-negative");
  if (warmup_steps > total_steps) throw ConfigError("warmup_steps exceeds total_steps");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (eval_every < 1) throw ConfigError("eval_every must be positive");
}

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ModelShape& shape,
                  const TrainConfig& config, std::optional<IfnmtppModel> initial,
                  const TrainCallback& on_eval) {
  config.validate();
  if (train_ds.sequences.empty()) throw DataError("empty training split");
  if (val_ds.sequences.empty()) throw DataError("empty validation split");
  if (train_ds.vocab_size != shape.num_marks || val_ds.vocab_size > shape.num_marks) {
    throw ConfigError("dataset vocabulary does not match the model's mark count");
  }

  IfnmtppModel model = initial ? std::move(*initial) : IfnmtppModel::initialize(shape, config.seed);
  if (!(model.shape() == shape)) throw ConfigError("initial model has a different shape");

  Dataset val_subset = val_ds;
  if (config.max_val_sequences > 0 && val_subset.sequences.size() > config.max_val_sequences) {
    val_subset.sequences.resize(config.max_val_sequences);
  }

  TrainResult result{model, {}, 0, 0.0, false, 0};
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_ds.sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  const Eigen::Index np = model.parameters().size();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(np);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  double window_loss = 0.0;
  std::size_t window_events = 0;
  double initial_train_nll = std::numeric_limits<double>::quiet_NaN();

  const double val0 = dataset_nll(val_subset, model.materialize());
  result.best_val_nll = val0;
  std::vector<const EventSequence*> batch;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int step = 1; step <= config.total_steps; ++step) {
    batch.clear();
    while (batch.size() < std::min(batch_size, order.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&train_ds.sequences[order[cursor++]]);
    }

    BatchGradient bg;
    try {
      bg = loss_gradients(std::span<const EventSequence* const>(batch), model);
    } catch (const NumericError&) {
      ++result.skipped_steps;
      continue;
    }
    const double per_event = bg.loss.total / static_cast<double>(std::max<std::size_t>(bg.loss.num_events, 1));
    if (step == 1) {
      initial_train_nll = per_event;
      result.history.push_back({0, initial_train_nll, val0});
      if (on_eval) on_eval(result.history.back());
    }
    window_loss += bg.loss.total;
    window_events += bg.loss.num_events;

    const double lr = config.warmup_steps > 0
                          ? config.learning_rate * std::min(1.0, static_cast<double>(step) / config.warmup_steps)
                          : config.learning_rate;
    beta1_pow *= config.beta1;
    beta2_pow *= config.beta2;
    m1 = config.beta1 * m1 + (1.0 - config.beta1) * bg.gradient;
    m2 = config.beta2 * m2 + (1.0 - config.beta2) * bg.gradient.cwiseAbs2();
    if (lr > 0.0) {
      const double c1 = 1.0 / (1.0 - beta1_pow);
      const double c2 = 1.0 / (1.0 - beta2_pow);
      model.parameters().array() -=
          lr * (m1.array() * c1) / ((m2.array() * c2).sqrt() + config.adam_epsilon);
    }

    if (step % config.eval_every == 0 || step == config.total_steps) {
      const double val = dataset_nll(val_subset, model.materialize());
      const double train_nll =
          window_events > 0 ? window_loss / static_cast<double>(window_events) : initial_train_nll;
      result.history.push_back({step, train_nll, val});
      if (on_eval) on_eval(result.history.back());
      window_loss = 0.0;
      window_events = 0;
      if (!std::isfinite(val)) {
        result.diverged = true;
        break;
      }
      if (val < result.best_val_nll) {
        result.best_val_nll = val;
        result.best_step = step;
        result.model = model;
      }
    }
  }
  if (result.history.empty()) result.history.push_back({0, initial_train_nll, val0});
  return result;
}

std::string history_csv(const std::vector<TrainLogRow>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "step,train_nll,val_nll\n";
  for (const auto& r : history) out << r.step << ',' << r.train_nll << ',' << r.val_nll << '\n';
  return out.str();
}

}  // namespace ifnmtpp
