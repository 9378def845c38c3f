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

// Integral estimation network. For each mark m and history h the network
// produces a score s(m, t) that is non-increasing in t; after subtracting its
// limit at infinity and dividing by the partition over marks at t_l it is the
// improper integral Gamma(m, t) of the conditional joint density from t to
// infinity. The density is minus its time derivative, computed in closed
// form by a forward tangent sweep.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/history_encoder.hpp"

namespace ifnmtpp {

/// Network weights after the non-negativity constraint has been applied.
/// `slopes`, every entry of `layers` and `aggregation` must be >= 0.
struct IemWeights {
  Eigen::MatrixXd slopes;        ///< v_m, d_f x |M|
  Eigen::MatrixXd offsets;       ///< b_m, d_f x |M|
  Eigen::MatrixXd conditioning;  ///< d_f x d_h, additive history term U h
  std::vector<Eigen::MatrixXd> layers;  ///< d_f x d_f each
  std::vector<Eigen::VectorXd> layer_biases;
  Eigen::VectorXd aggregation;  ///< d_f
  double aggregation_bias = 0.0;
  double epsilon = 1e-10;

  int num_marks() const { return static_cast<int>(slopes.cols()); }
  int input_dim() const { return static_cast<int>(slopes.rows()); }
  int history_dim() const { return static_cast<int>(conditioning.cols()); }
  int num_layers() const { return static_cast<int>(layers.size()); }

  static IemWeights zeros(int num_marks, int input_dim, int history_dim, int num_layers);
  IemWeights zeros_like() const;

  /// Throws NumericError if a constrained entry is negative or any entry is
  /// non-finite.
  void check() const;
  /// Per-unit flag: the first layer's pre-activation grows without bound in
  /// t for mark m, so its tanh saturates at +1.
  Eigen::Array<bool, Eigen::Dynamic, 1> saturating_units(MarkId m) const;
  bool all_units_saturate() const;
};

/// Evaluation request: mark, history column and elapsed time t - t_l.
struct IemColumn {
  MarkId mark = 0;
  Eigen::Index state = 0;
  double dt = 0.0;
};

/// Batched forward/tangent/reverse sweep through the network. The score is
/// s = 1 / (1 + exp(x)) where x is the aggregated pre-activation returned by
/// `x()`; `x_dot()` holds dx/dt. Reverse mode covers both outputs, so losses
/// built from the time derivative get exact parameter gradients.
class IemPass {
 public:
  /// `conditioned` holds U h for every history column referenced by `columns`.
  void forward(const IemWeights& w, const Eigen::MatrixXd& conditioned,
               std::span<const IemColumn> columns, bool with_tangent);
  /// Runs layers 1..L-1 starting from given first-layer activations; used for
  /// the limit of the score at t -> infinity.
  void forward_from_first(const IemWeights& w, Eigen::MatrixXd first_activation);

  const Eigen::RowVectorXd& x() const { return x_; }
  const Eigen::RowVectorXd& x_dot() const { return x_dot_; }
  const Eigen::MatrixXd& first_activation() const { return acts_.front(); }
  Eigen::Index size() const { return x_.size(); }

  /// Accumulates parameter adjoints into `grads` and history adjoints into
  /// `conditioned_bar` (same shape as the `conditioned` input). `x_dot_bar`
  /// may be null when the pass ran without tangent. `first_activation_bar`
  /// adds an external adjoint on the first layer's activations.
  void backward(const IemWeights& w, const Eigen::RowVectorXd& x_bar,
                const Eigen::RowVectorXd* x_dot_bar, IemWeights& grads,
                Eigen::MatrixXd& conditioned_bar,
                const Eigen::MatrixXd* first_activation_bar = nullptr) const;
  /// Reverse sweep for a pass started with forward_from_first. Returns the
  /// adjoint of the given first-layer activations.
  Eigen::MatrixXd backward_from_first(const IemWeights& w, const Eigen::RowVectorXd& x_bar,
                                      IemWeights& grads) const;

 private:
  std::vector<IemColumn> columns_;
  bool tangent_ = false;
  bool from_first_ = false;
  Eigen::MatrixXd input_;
  std::vector<Eigen::MatrixXd> acts_;      // a_k, k = 0..L-1
  std::vector<Eigen::MatrixXd> acts_dot_;  // da_k/dt
  std::vector<Eigen::MatrixXd> pre_dot_;   // dz_k/dt
  Eigen::RowVectorXd x_;
  Eigen::RowVectorXd x_dot_;
};

/// s = 1 / (1 + e^x).
inline double score_from_preactivation(double x) { return 1.0 / (1.0 + std::exp(x)); }

struct GammaEval {
  std::vector<double> gamma;        ///< Gamma(m, t)
  std::vector<double> gamma_at_tl;  ///< Gamma(m, t_l) = p(m)
  std::vector<double> pdf;          ///< p(m, t)
  double partition = 0.0;           ///< Z
};

/// Gamma(., t) for one fixed history. Holds a pointer to `weights`, which
/// must outlive it.
class ConditionalIntegral {
 public:
  ConditionalIntegral(const IemWeights& weights, const HistoryState& history);

  int num_marks() const { return static_cast<int>(score_at_last_.size()); }
  double t_last() const { return t_last_; }
  double partition() const { return partition_; }
  /// s(m, t_l) and lim_{t->inf} s(m, t).
  double score_at_last(MarkId m) const { return score_at_last_[static_cast<std::size_t>(m)]; }
  double tail(MarkId m) const { return tail_[static_cast<std::size_t>(m)]; }
  /// Gamma(m, t_l); sums to one over marks.
  const std::vector<double>& mark_prob() const { return mark_prob_; }

  /// Raw scores and (optionally) their time derivatives at absolute times.
  void scores(MarkId m, std::span<const double> times, std::span<double> s,
              std::span<double> ds_dt = {}) const;

  double gamma(MarkId m, double t) const;
  double pdf(MarkId m, double t) const;
  double cond_cdf(MarkId m, double t) const;
  void gamma_batch(MarkId m, std::span<const double> times, std::span<double> out) const;
  void pdf_batch(MarkId m, std::span<const double> times, std::span<double> out) const;
  void cond_cdf_batch(MarkId m, std::span<const double> times, std::span<double> out) const;

  GammaEval eval(double t) const;

 private:
  void check_time(double t) const;
  void check_mark(MarkId m) const;

  const IemWeights* weights_;
  Eigen::MatrixXd conditioned_;  // d_f x 1
  double t_last_;
  std::vector<double> score_at_last_;
  std::vector<double> tail_;
  std::vector<double> mark_prob_;
  double partition_ = 0.0;
};

// Single-query conveniences over ConditionalIntegral.
double raw_score(MarkId m, double t, const HistoryState& h, const IemWeights& w);
double tail_constant(MarkId m, const HistoryState& h, const IemWeights& w);
GammaEval gamma(double t, const HistoryState& h, const IemWeights& w);
double pdf(MarkId m, double t, const HistoryState& h, const IemWeights& w);
std::vector<double> mark_prob(const HistoryState& h, const IemWeights& w);
double cond_cdf(MarkId m, double t, const HistoryState& h, const IemWeights& w);

}  // namespace ifnmtpp
