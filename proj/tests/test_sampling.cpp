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

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/integral_net.hpp"
#include "ifnmtpp/sampling.hpp"
#include "test_util.hpp"

using namespace ifnmtpp;
using ifnmtpp::testing::random_history;
using ifnmtpp::testing::random_model;
using ifnmtpp::testing::shape_of;

namespace {

struct Fixture {
  IemWeights w;
  HistoryState h;
  Fixture(int marks, std::uint64_t seed, double t_last = 0.5)
      : w(random_model(shape_of(marks, 4, 6, 2), seed).materialize().iem),
        h(random_history(4, t_last, seed + 100)) {}
};

}  // namespace

TEST_CASE("round trip hits the requested CDF level") {
  SampleConfig cfg;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, cfg.u_max);
  int draws = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Fixture f(3, seed);
    const ConditionalIntegral ci(f.w, f.h);
    for (int k = 0; k < 20; ++k, ++draws) {
      const MarkId m = k % 3;
      const double u = unif(rng);
      const double t = sample_time(ci, m, u, cfg);
      CHECK(t >= f.h.t_last);
      worst = std::max(worst, std::abs(ci.cond_cdf(m, t) - u));
    }
  }
  CHECK(draws == 1000);
  CHECK(worst <= 1e-6);
}

TEST_CASE("u near zero returns t_l") {
  Fixture f(2, 3, 1.25);
  const ConditionalIntegral ci(f.w, f.h);
  SampleConfig cfg;
  CHECK(sample_time(ci, 0, 0.0, cfg) == 1.25);
  const double t = sample_time(ci, 0, 1e-5, cfg);
  CHECK(t >= 1.25);
  CHECK(t - 1.25 < 1e-2);
  CHECK(ci.cond_cdf(0, 1.25) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sampler is monotone in u") {
  Fixture f(4, 9);
  const ConditionalIntegral ci(f.w, f.h);
  SampleConfig cfg;
  std::vector<double> us;
  for (int i = 1; i < 90; ++i) us.push_back(0.01 * i);
  for (MarkId m = 0; m < 4; ++m) {
    const auto ts = sample_times(ci, m, us, cfg);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i - 1] <= ts[i]);
  }
}

TEST_CASE("predict_time with one sample equals sample_time") {
  Fixture f(3, 11);
  const ConditionalIntegral ci(f.w, f.h);
  SampleConfig cfg;
  cfg.n_samples = 1;
  cfg.seed = 77;
  const double u = draw_uniforms(cfg).front();
  CHECK(predict_time(ci, 2, cfg) == sample_time(ci, 2, u, cfg));
}

TEST_CASE("predictions are deterministic given the seed") {
  Fixture f(3, 12);
  const ConditionalIntegral ci(f.w, f.h);
  SampleConfig cfg;
  cfg.seed = 1234;
  CHECK(predict_time(ci, 1, cfg) == predict_time(ci, 1, cfg));
  CHECK(predict_time_marginal(ci, cfg) == predict_time_marginal(ci, cfg));
  auto other = cfg;
  other.seed = 1235;
  CHECK(predict_time(ci, 1, cfg) != predict_time(ci, 1, other));
  for (double u : draw_uniforms(cfg)) {
    CHECK(u >= 0.0);
    CHECK(u < cfg.u_max);
  }
}

TEST_CASE("samples pass a KS test against the model CDF") {
  Fixture f(3, 21);
  const ConditionalIntegral ci(f.w, f.h);
  SampleConfig cfg;
  cfg.n_samples = 10000;
  cfg.seed = 99;
  // Fine tolerance so the bisection error stays far below the KS resolution.
  cfg.bisection_tol = 1e-9;
  const auto ts = sample_times(ci, 1, draw_uniforms(cfg), cfg);
  std::vector<double> z(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) z[i] = ci.cond_cdf(1, ts[i]) / cfg.u_max;
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - z[i], z[i] - static_cast<double>(i) / n});
  }
  // Asymptotic critical value at alpha = 0.01.
  CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("marginal CDF") {
  Fixture f(4, 31, 2.0);
  const ConditionalIntegral ci(f.w, f.h);
  CHECK(std::abs(marginal_cdf(ci, 2.0)) <= 1e-9);
  double prev = 0.0;
  for (double t = 2.0; t < 40.0; t += 0.05) {
    const double v = marginal_cdf(ci, t);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
  // Equals the mark-weighted mixture of conditional CDFs.
  for (double t : {2.1, 3.0, 7.5}) {
    double mix = 0.0;
    for (MarkId m = 0; m < 4; ++m) mix += ci.mark_prob()[static_cast<std::size_t>(m)] * ci.cond_cdf(m, t);
    CHECK(marginal_cdf(ci, t) == doctest::Approx(mix).epsilon(1e-9));
  }
  SampleConfig cfg;
  const double t = sample_time_marginal(ci, 0.4, cfg);
  CHECK(std::abs(marginal_cdf(ci, t) - 0.4) <= cfg.bisection_tol);
}

TEST_CASE("a single mark makes the marginal and conditional CDFs coincide") {
  Fixture f(1, 41);
  const ConditionalIntegral ci(f.w, f.h);
  // They differ only by the eps share of the mass at t_l, which the
  // marginal counts as already spent.
  const double share = f.w.epsilon / ci.partition();
  for (double t : {0.5, 0.7, 1.3, 4.0, 20.0}) {
    const double c = ci.cond_cdf(0, t);
    if (c < 1.0 - share) CHECK(std::abs(marginal_cdf(ci, t) - c - share) <= 1e-14);
    CHECK(std::abs(marginal_cdf(ci, t) - c) <= 1e-9);
  }
  SampleConfig cfg;
  cfg.seed = 3;
  CHECK(predict_time_marginal(ci, cfg) == doctest::Approx(predict_time(ci, 0, cfg)).epsilon(1e-6));
  const auto p = mark_given_time(ci, 1.0);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == 1.0);
}

TEST_CASE("mark given time") {
  Fixture f(4, 51);
  const ConditionalIntegral ci(f.w, f.h);
  for (double t : {0.6, 1.0, 2.5}) {
    const auto p = mark_given_time(ci, t);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    // Finite differences of Gamma give the densities up to a common factor.
    const double step = 1e-5;
    std::vector<double> fd(4);
    double total = 0.0;
    for (MarkId m = 0; m < 4; ++m) {
      fd[static_cast<std::size_t>(m)] = (ci.gamma(m, t - step) - ci.gamma(m, t + step)) / (2 * step);
      total += fd[static_cast<std::size_t>(m)];
    }
    for (std::size_t m = 0; m < 4; ++m) CHECK(std::abs(p[m] - fd[m] / total) <= 1e-4);
  }
}

TEST_CASE("configuration and error paths") {
  SampleConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.u_max = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.u_max = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.bisection_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  // A CDF that never exceeds one half cannot be bracketed.
  const CdfBatch stuck = [](std::span<const double> t, std::span<double> f) {
    for (std::size_t i = 0; i < t.size(); ++i) f[i] = 0.5 * (1.0 - std::exp(-t[i]));
  };
  std::vector<double> us{0.7};
  CHECK_THROWS_AS(invert_cdf(stuck, 0.0, us, SampleConfig{}), NumericError);

  // Steep step: the bisection cannot reach the tolerance in few iterations.
  const CdfBatch step = [](std::span<const double> t, std::span<double> f) {
    for (std::size_t i = 0; i < t.size(); ++i) f[i] = t[i] < 0.3 ? 0.0 : 1.0 - 0.5 * std::exp(-t[i]);
  };
  SampleConfig few;
  few.max_bisection_iters = 5;
  us = {0.2};
  CHECK_THROWS_AS(invert_cdf(step, 0.0, us, few), NumericError);

  us = {1.0};
  CHECK_THROWS_AS(invert_cdf(stuck, 0.0, us, SampleConfig{}), std::invalid_argument);

  // Exponential CDF recovers its closed-form quantile.
  const CdfBatch expo = [](std::span<const double> t, std::span<double> f) {
    for (std::size_t i = 0; i < t.size(); ++i) f[i] = 1.0 - std::exp(-(t[i] - 2.0));
  };
  SampleConfig tight;
  tight.bisection_tol = 1e-12;
  us = {0.5, 0.1, 0.89};
  const auto r = invert_cdf(expo, 2.0, us, tight);
  for (std::size_t i = 0; i < us.size(); ++i) {
    CHECK(r[i].time == doctest::Approx(2.0 - std::log1p(-us[i])).epsilon(1e-9));
  }
}
