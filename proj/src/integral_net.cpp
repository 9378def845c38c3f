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

#include "ifnmtpp/integral_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ifnmtpp/error.hpp"

namespace ifnmtpp {

IemWeights IemWeights::zeros(int num_marks, int input_dim, int history_dim, int num_layers) {
  IemWeights w;
  w.slopes = Eigen::MatrixXd::Zero(input_dim, num_marks);
  w.offsets = Eigen::MatrixXd::Zero(input_dim, num_marks);
  w.conditioning = Eigen::MatrixXd::Zero(input_dim, history_dim);
  for (int k = 0; k < num_layers; ++k) {
    w.layers.push_back(Eigen::MatrixXd::Zero(input_dim, input_dim));
    w.layer_biases.push_back(Eigen::VectorXd::Zero(input_dim));
  }
  w.aggregation = Eigen::VectorXd::Zero(input_dim);
  return w;
}

IemWeights IemWeights::zeros_like() const {
  IemWeights z = zeros(num_marks(), input_dim(), history_dim(), num_layers());
  z.epsilon = epsilon;
  return z;
}

void IemWeights::check() const {
  const auto finite = [](const auto& m) { return m.allFinite(); };
  if (layers.empty()) throw NumericError("integral network needs at least one layer");
  if ((slopes.array() < 0.0).any()) throw NumericError("negative slope weight");
  if ((aggregation.array() < 0.0).any()) throw NumericError("negative aggregation weight");
  for (const auto& l : layers) {
    if ((l.array() < 0.0).any()) throw NumericError("negative layer weight");
    if (!finite(l)) throw NumericError("non-finite layer weight");
  }
  for (const auto& b : layer_biases) {
    if (!finite(b)) throw NumericError("non-finite layer bias");
  }
  if (!finite(slopes) || !finite(offsets) || !finite(conditioning) || !finite(aggregation) ||
      !std::isfinite(aggregation_bias)) {
    throw NumericError("non-finite integral network weight");
  }
  if (!(epsilon > 0.0)) throw NumericError("epsilon must be positive");
}

Eigen::Array<bool, Eigen::Dynamic, 1> IemWeights::saturating_units(MarkId m) const {
  return (layers.front() * slopes.col(m)).array() > 0.0;
}

bool IemWeights::all_units_saturate() const {
  for (MarkId m = 0; m < num_marks(); ++m) {
    if (!saturating_units(m).all()) return false;
  }
  return true;
}

void IemPass::forward(const IemWeights& w, const Eigen::MatrixXd& conditioned,
                      std::span<const IemColumn> columns, bool with_tangent) {
  const auto n = static_cast<Eigen::Index>(columns.size());
  const Eigen::Index d = w.input_dim();
  const int depth = w.num_layers();
  columns_.assign(columns.begin(), columns.end());
  tangent_ = with_tangent;
  from_first_ = false;

  input_.resize(d, n);
  Eigen::MatrixXd input_dot;
  if (tangent_) input_dot.resize(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const IemColumn& c = columns_[static_cast<std::size_t>(j)];
    input_.col(j) = w.slopes.col(c.mark) * c.dt + w.offsets.col(c.mark) + conditioned.col(c.state);
    if (tangent_) input_dot.col(j) = w.slopes.col(c.mark);
  }

  acts_.resize(static_cast<std::size_t>(depth));
  acts_dot_.resize(tangent_ ? static_cast<std::size_t>(depth) + 1 : 0);
  pre_dot_.resize(tangent_ ? static_cast<std::size_t>(depth) : 0);
  if (tangent_) acts_dot_[0] = std::move(input_dot);  // index k + 1 holds da_k/dt
  for (int k = 0; k < depth; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd& prev = k == 0 ? input_ : acts_[ks - 1];
    Eigen::MatrixXd z = w.layers[ks] * prev;
    z.colwise() += w.layer_biases[ks];
    acts_[ks] = z.array().tanh().matrix();
    if (tangent_) {
      pre_dot_[ks].noalias() = w.layers[ks] * acts_dot_[ks];
      acts_dot_[ks + 1] =
          ((1.0 - acts_[ks].array().square()) * pre_dot_[ks].array()).matrix();
    }
  }
  x_.noalias() = w.aggregation.transpose() * acts_.back();
  x_.array() += w.aggregation_bias;
  if (tangent_) {
    x_dot_.noalias() = w.aggregation.transpose() * acts_dot_.back();
  } else {
    x_dot_.resize(0);
  }
}

void IemPass::forward_from_first(const IemWeights& w, Eigen::MatrixXd first_activation) {
  const int depth = w.num_layers();
  columns_.clear();
  tangent_ = false;
  from_first_ = true;
  acts_.resize(static_cast<std::size_t>(depth));
  acts_dot_.clear();
  pre_dot_.clear();
  acts_[0] = std::move(first_activation);
  for (int k = 1; k < depth; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    Eigen::MatrixXd z = w.layers[ks] * acts_[ks - 1];
    z.colwise() += w.layer_biases[ks];
    acts_[ks] = z.array().tanh().matrix();
  }
  x_.noalias() = w.aggregation.transpose() * acts_.back();
  x_.array() += w.aggregation_bias;
  x_dot_.resize(0);
}

namespace {

// Shared reverse sweep over layers [stop, L). On return `a_bar` holds the
// adjoint of a_{stop-1} (or of the network input when stop == 0) and
// `a_dot_bar` the matching tangent adjoint.
void reverse_layers(const IemWeights& w, const std::vector<Eigen::MatrixXd>& acts,
                    const std::vector<Eigen::MatrixXd>& acts_dot,
                    const std::vector<Eigen::MatrixXd>& pre_dot, const Eigen::MatrixXd& input,
                    bool tangent, int stop, const Eigen::MatrixXd* first_activation_bar,
                    Eigen::MatrixXd& a_bar, Eigen::MatrixXd& a_dot_bar, IemWeights& grads) {
  for (int k = w.num_layers() - 1; k >= stop; --k) {
    const auto ks = static_cast<std::size_t>(k);
    if (k == 0 && first_activation_bar != nullptr) a_bar += *first_activation_bar;
    const Eigen::ArrayXXd a = acts[ks].array();
    const Eigen::ArrayXXd g = 1.0 - a.square();
    Eigen::MatrixXd z_dot_bar;
    if (tangent) {
      z_dot_bar = (g * a_dot_bar.array()).matrix();
      // da_dot/da through g = 1 - a^2.
      a_bar.array() -= 2.0 * a * pre_dot[ks].array() * a_dot_bar.array();
    }
    const Eigen::MatrixXd z_bar = (g * a_bar.array()).matrix();
    const Eigen::MatrixXd& prev = k == 0 ? input : acts[ks - 1];
    grads.layers[ks].noalias() += z_bar * prev.transpose();
    grads.layer_biases[ks] += z_bar.rowwise().sum();
    a_bar.noalias() = w.layers[ks].transpose() * z_bar;
    if (tangent) {
      grads.layers[ks].noalias() += z_dot_bar * acts_dot[ks].transpose();
      a_dot_bar.noalias() = w.layers[ks].transpose() * z_dot_bar;
    }
  }
}

}  // namespace

void IemPass::backward(const IemWeights& w, const Eigen::RowVectorXd& x_bar,
                       const Eigen::RowVectorXd* x_dot_bar, IemWeights& grads,
                       Eigen::MatrixXd& conditioned_bar,
                       const Eigen::MatrixXd* first_activation_bar) const {
  if (from_first_) throw std::logic_error("IemPass::backward after forward_from_first");
  const bool tangent = tangent_ && x_dot_bar != nullptr;

  grads.aggregation.noalias() += acts_.back() * x_bar.transpose();
  grads.aggregation_bias += x_bar.sum();
  Eigen::MatrixXd a_bar = w.aggregation * x_bar;
  Eigen::MatrixXd a_dot_bar;
  if (tangent) {
    grads.aggregation.noalias() += acts_dot_.back() * x_dot_bar->transpose();
    a_dot_bar = w.aggregation * *x_dot_bar;
  }
  reverse_layers(w, acts_, acts_dot_, pre_dot_, input_, tangent, 0, first_activation_bar, a_bar,
                 a_dot_bar, grads);

  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const IemColumn& c = columns_[j];
    const auto jj = static_cast<Eigen::Index>(j);
    grads.slopes.col(c.mark) += c.dt * a_bar.col(jj);
    if (tangent) grads.slopes.col(c.mark) += a_dot_bar.col(jj);
    grads.offsets.col(c.mark) += a_bar.col(jj);
    conditioned_bar.col(c.state) += a_bar.col(jj);
  }
}

Eigen::MatrixXd IemPass::backward_from_first(const IemWeights& w, const Eigen::RowVectorXd& x_bar,
                                             IemWeights& grads) const {
  if (!from_first_) throw std::logic_error("IemPass::backward_from_first without forward_from_first");
  grads.aggregation.noalias() += acts_.back() * x_bar.transpose();
  grads.aggregation_bias += x_bar.sum();
  Eigen::MatrixXd a_bar = w.aggregation * x_bar;
  Eigen::MatrixXd unused;
  reverse_layers(w, acts_, acts_dot_, pre_dot_, input_, false, 1, nullptr, a_bar, unused, grads);
  return a_bar;
}

ConditionalIntegral::ConditionalIntegral(const IemWeights& weights, const HistoryState& history)
    : weights_(&weights), t_last_(history.t_last) {
  const int marks = weights.num_marks();
  if (history.h.size() != weights.history_dim()) {
    throw std::invalid_argument("history width does not match the integral network");
  }
  conditioned_ = weights.conditioning * history.h;

  std::vector<IemColumn> cols;
  for (MarkId m = 0; m < marks; ++m) cols.push_back({m, 0, 0.0});
  IemPass at_last;
  at_last.forward(weights, conditioned_, cols, false);

  Eigen::MatrixXd limit_first = at_last.first_activation();
  for (MarkId m = 0; m < marks; ++m) {
    const auto sat = weights.saturating_units(m);
    for (Eigen::Index j = 0; j < sat.size(); ++j) {
      if (sat(j)) limit_first(j, m) = 1.0;
    }
  }
  IemPass limit;
  limit.forward_from_first(weights, std::move(limit_first));

  score_at_last_.resize(static_cast<std::size_t>(marks));
  tail_.resize(static_cast<std::size_t>(marks));
  double z = weights.epsilon;
  for (MarkId m = 0; m < marks; ++m) {
    const auto ms = static_cast<std::size_t>(m);
    score_at_last_[ms] = score_from_preactivation(at_last.x()(m));
    tail_[ms] = score_from_preactivation(limit.x()(m));
    z += std::max(score_at_last_[ms] - tail_[ms], 0.0);
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("non-positive partition function");
  partition_ = z;
  mark_prob_.resize(static_cast<std::size_t>(marks));
  const double share = weights.epsilon / marks;
  for (MarkId m = 0; m < marks; ++m) {
    const auto ms = static_cast<std::size_t>(m);
    mark_prob_[ms] = (std::max(score_at_last_[ms] - tail_[ms], 0.0) + share) / z;
  }
}

void ConditionalIntegral::check_time(double t) const {
  if (!(t >= t_last_)) {
    throw std::invalid_argument("query time " + std::to_string(t) + " precedes t_last " +
                                std::to_string(t_last_));
  }
}

void ConditionalIntegral::check_mark(MarkId m) const {
  if (m < 0 || m >= num_marks()) throw std::invalid_argument("mark out of range");
}

void ConditionalIntegral::scores(MarkId m, std::span<const double> times, std::span<double> s,
                                 std::span<double> ds_dt) const {
  check_mark(m);
  const bool tangent = !ds_dt.empty();
  std::vector<IemColumn> cols;
  std::vector<std::size_t> where;
  cols.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    check_time(times[i]);
    if (times[i] == t_last_ && !tangent) {
      s[i] = score_at_last(m);
      continue;
    }
    cols.push_back({m, 0, times[i] - t_last_});
    where.push_back(i);
  }
  if (cols.empty()) return;
  IemPass pass;
  pass.forward(*weights_, conditioned_, cols, tangent);
  for (std::size_t j = 0; j < where.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double x = pass.x()(jj);
    const double sc = score_from_preactivation(x);
    s[where[j]] = times[where[j]] == t_last_ ? score_at_last(m) : sc;
    if (tangent) {
      // s(1 - s) as a product of two logistic factors keeps precision in both tails.
      ds_dt[where[j]] = -sc * score_from_preactivation(-x) * pass.x_dot()(jj);
    }
  }
}

double ConditionalIntegral::gamma(MarkId m, double t) const {
  double out = 0.0;
  gamma_batch(m, std::span<const double>(&t, 1), std::span<double>(&out, 1));
  return out;
}

double ConditionalIntegral::pdf(MarkId m, double t) const {
  double out = 0.0;
  pdf_batch(m, std::span<const double>(&t, 1), std::span<double>(&out, 1));
  return out;
}

double ConditionalIntegral::cond_cdf(MarkId m, double t) const {
  double out = 0.0;
  cond_cdf_batch(m, std::span<const double>(&t, 1), std::span<double>(&out, 1));
  return out;
}

void ConditionalIntegral::gamma_batch(MarkId m, std::span<const double> times,
                                      std::span<double> out) const {
  scores(m, times, out);
  for (double& v : out.first(times.size())) v = std::max(v - tail(m), 0.0) / partition_;
}

void ConditionalIntegral::pdf_batch(MarkId m, std::span<const double> times,
                                    std::span<double> out) const {
  std::vector<double> s(times.size());
  scores(m, times, s, out);
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = std::max(-out[i], 0.0) / partition_;
}

void ConditionalIntegral::cond_cdf_batch(MarkId m, std::span<const double> times,
                                         std::span<double> out) const {
  check_mark(m);
  const double mass = std::max(score_at_last(m) - tail(m), 0.0);
  if (!(mass > 0.0)) {
    throw NumericError("mark " + std::to_string(m) + " has zero probability mass");
  }
  const double denom = mass + weights_->epsilon / num_marks();
  scores(m, times, out);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double remaining = std::max(out[i] - tail(m), 0.0);
    out[i] = std::clamp((mass - remaining) / denom, 0.0, 1.0);
  }
}

GammaEval ConditionalIntegral::eval(double t) const {
  check_time(t);
  GammaEval ev;
  ev.partition = partition_;
  ev.gamma_at_tl = mark_prob_;
  for (MarkId m = 0; m < num_marks(); ++m) {
    ev.gamma.push_back(gamma(m, t));
    ev.pdf.push_back(pdf(m, t));
  }
  return ev;
}

double raw_score(MarkId m, double t, const HistoryState& h, const IemWeights& w) {
  const ConditionalIntegral ci(w, h);
  double s = 0.0;
  ci.scores(m, std::span<const double>(&t, 1), std::span<double>(&s, 1));
  return s;
}

double tail_constant(MarkId m, const HistoryState& h, const IemWeights& w) {
  const ConditionalIntegral ci(w, h);
  if (m < 0 || m >= ci.num_marks()) throw std::invalid_argument("mark out of range");
  return ci.tail(m);
}

GammaEval gamma(double t, const HistoryState& h, const IemWeights& w) {
  return ConditionalIntegral(w, h).eval(t);
}

double pdf(MarkId m, double t, const HistoryState& h, const IemWeights& w) {
  return ConditionalIntegral(w, h).pdf(m, t);
}

std::vector<double> mark_prob(const HistoryState& h, const IemWeights& w) {
  return ConditionalIntegral(w, h).mark_prob();
}

double cond_cdf(MarkId m, double t, const HistoryState& h, const IemWeights& w) {
  return ConditionalIntegral(w, h).cond_cdf(m, t);
}

}  // namespace ifnmtpp
