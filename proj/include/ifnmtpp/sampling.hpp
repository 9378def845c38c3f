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

// Inverse-transform sampling of next-event times from the learned CDFs and
// the derived time predictions.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ifnmtpp/integral_net.hpp"

namespace ifnmtpp {

struct SampleConfig {
  int n_samples = 100;
  double u_max = 0.9;
  double bisection_tol = 1e-6;  ///< in CDF space
  int max_bisection_iters = 200;
  double initial_bracket = 1.0;  ///< first upper bracket offset from t_l
  int max_doublings = 60;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SampleResult {
  double time = 0.0;
  int iterations = 0;
  double residual = 0.0;  ///< |F(time) - u|
};

/// Batched CDF evaluation at absolute times.
using CdfBatch = std::function<void(std::span<const double> times, std::span<double> cdf)>;

/// Solves F(t) = u for every u by bracket doubling from `t_last` followed by
/// bisection. F must be non-decreasing with F(t_last) ~ 0. Throws
/// NumericError when no bracket is found or the tolerance is not reached.
std::vector<SampleResult> invert_cdf(const CdfBatch& cdf, double t_last, std::span<const double> us,
                                     const SampleConfig& cfg);

double sample_time(const ConditionalIntegral& ci, MarkId m, double u, const SampleConfig& cfg);
SampleResult sample_time_detailed(const ConditionalIntegral& ci, MarkId m, double u,
                                  const SampleConfig& cfg);
std::vector<double> sample_times(const ConditionalIntegral& ci, MarkId m, std::span<const double> us,
                                 const SampleConfig& cfg);

/// Draws n_samples u ~ U(0, u_max) from a generator seeded with cfg.seed.
std::vector<double> draw_uniforms(const SampleConfig& cfg);

/// Mean of n_samples inverse-transform draws from F(t | m).
double predict_time(const ConditionalIntegral& ci, MarkId m, const SampleConfig& cfg);

/// F(t) = 1 - sum_m Gamma(m, t).
double marginal_cdf(const ConditionalIntegral& ci, double t);
void marginal_cdf_batch(const ConditionalIntegral& ci, std::span<const double> times, std::span<double> out);
double sample_time_marginal(const ConditionalIntegral& ci, double u, const SampleConfig& cfg);
double predict_time_marginal(const ConditionalIntegral& ci, const SampleConfig& cfg);

/// p(m | t) = p(m, t) / sum_n p(n, t). Throws NumericError when the total
/// density at t is zero.
std::vector<double> mark_given_time(const ConditionalIntegral& ci, double t);

}  // namespace ifnmtpp
