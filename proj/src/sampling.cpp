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

#include "ifnmtpp/sampling.hpp"

#include <cmath>
#include <random>
#include <string>

#include "ifnmtpp/error.hpp"

namespace ifnmtpp {

void SampleConfig::validate() const {
  if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (!(u_max > 0.0 && u_max <= 1.0)) throw ConfigError("u_max must lie in (0, 1]");
  if (!(bisection_tol > 0.0)) throw ConfigError("bisection_tol must be positive");
  if (max_bisection_iters < 1) throw ConfigError("max_bisection_iters must be positive");
  if (!(initial_bracket > 0.0)) throw ConfigError("initial_bracket must be positive");
}

std::vector<SampleResult> invert_cdf(const CdfBatch& cdf, double t_last, std::span<const double> us,
                                     const SampleConfig& cfg) {
  const std::size_t n = us.size();
  std::vector<SampleResult> out(n);
  std::vector<double> lo(n, t_last), hi(n, t_last + cfg.initial_bracket);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(us[i] >= 0.0 && us[i] < 1.0)) throw std::invalid_argument("u must lie in [0, 1)");
    if (us[i] <= cfg.bisection_tol) {
      out[i] = {t_last, 0, us[i]};  // F(t_l) = 0
    } else {
      active.push_back(i);
    }
  }

  std::vector<double> ts, fs;
  // Grow the upper bracket until F(hi) > u.
  std::vector<std::size_t> growing = active;
  for (int k = 0; !growing.empty(); ++k) {
    if (k > cfg.max_doublings) {
      throw NumericError("no CDF bracket after " + std::to_string(cfg.max_doublings) +
                         " doublings: the tail mass has not decayed");
    }
    ts.resize(growing.size());
    fs.resize(growing.size());
    for (std::size_t j = 0; j < growing.size(); ++j) ts[j] = hi[growing[j]];
    cdf(ts, fs);
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < growing.size(); ++j) {
      const std::size_t i = growing[j];
      if (fs[j] <= us[i]) {
        lo[i] = hi[i];
        hi[i] = t_last + 2.0 * (hi[i] - t_last);
        next.push_back(i);
      }
    }
    growing.swap(next);
  }

  for (int iter = 1; !active.empty(); ++iter) {
    ts.resize(active.size());
    fs.resize(active.size());
    for (std::size_t j = 0; j < active.size(); ++j) {
      const std::size_t i = active[j];
      ts[j] = lo[i] + 0.5 * (hi[i] - lo[i]);
    }
    cdf(ts, fs);
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const std::size_t i = active[j];
      const double residual = std::abs(fs[j] - us[i]);
      if (residual <= cfg.bisection_tol) {
        out[i] = {ts[j], iter, residual};
        continue;
      }
      if (iter >= cfg.max_bisection_iters || !(ts[j] > lo[i] && ts[j] < hi[i])) {
        throw NumericError("bisection stopped after " + std::to_string(iter) +
                           " iterations with residual " + std::to_string(residual));
      }
      (fs[j] < us[i] ? lo[i] : hi[i]) = ts[j];
      next.push_back(i);
    }
    active.swap(next);
  }
  return out;
}

namespace {

CdfBatch conditional(const ConditionalIntegral& ci, MarkId m) {
  return [&ci, m](std::span<const double> t, std::span<double> f) { ci.cond_cdf_batch(m, t, f); };
}

CdfBatch marginal(const ConditionalIntegral& ci) {
  return [&ci](std::span<const double> t, std::span<double> f) { marginal_cdf_batch(ci, t, f); };
}

double mean_time(const std::vector<SampleResult>& r) {
  double sum = 0.0;
  for (const auto& s : r) sum += s.time;
  return sum / static_cast<double>(r.size());
}

}  // namespace

SampleResult sample_time_detailed(const ConditionalIntegral& ci, MarkId m, double u,
                                  const SampleConfig& cfg) {
  return invert_cdf(conditional(ci, m), ci.t_last(), std::span<const double>(&u, 1), cfg).front();
}

double sample_time(const ConditionalIntegral& ci, MarkId m, double u, const SampleConfig& cfg) {
  return sample_time_detailed(ci, m, u, cfg).time;
}

std::vector<double> sample_times(const ConditionalIntegral& ci, MarkId m, std::span<const double> us,
                                 const SampleConfig& cfg) {
  const auto r = invert_cdf(conditional(ci, m), ci.t_last(), us, cfg);
  std::vector<double> out;
  out.reserve(r.size());
  for (const auto& s : r) out.push_back(s.time);
  return out;
}

std::vector<double> draw_uniforms(const SampleConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(0.0, cfg.u_max);
  std::vector<double> us(static_cast<std::size_t>(cfg.n_samples));
  for (double& u : us) {
    do {
      u = dist(rng);
    } while (u >= 1.0);
  }
  return us;
}

double predict_time(const ConditionalIntegral& ci, MarkId m, const SampleConfig& cfg) {
  const auto us = draw_uniforms(cfg);
  return mean_time(invert_cdf(conditional(ci, m), ci.t_last(), us, cfg));
}

void marginal_cdf_batch(const ConditionalIntegral& ci, std::span<const double> times,
                        std::span<double> out) {
  std::vector<double> g(times.size());
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(times.size()), 1.0);
  for (MarkId m = 0; m < ci.num_marks(); ++m) {
    ci.gamma_batch(m, times, g);
    for (std::size_t i = 0; i < times.size(); ++i) out[i] -= g[i];
  }
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
}

double marginal_cdf(const ConditionalIntegral& ci, double t) {
  double f = 0.0;
  marginal_cdf_batch(ci, std::span<const double>(&t, 1), std::span<double>(&f, 1));
  return f;
}

double sample_time_marginal(const ConditionalIntegral& ci, double u, const SampleConfig& cfg) {
  return invert_cdf(marginal(ci), ci.t_last(), std::span<const double>(&u, 1), cfg).front().time;
}

double predict_time_marginal(const ConditionalIntegral& ci, const SampleConfig& cfg) {
  const auto us = draw_uniforms(cfg);
  return mean_time(invert_cdf(marginal(ci), ci.t_last(), us, cfg));
}

std::vector<double> mark_given_time(const ConditionalIntegral& ci, double t) {
  std::vector<double> p(static_cast<std::size_t>(ci.num_marks()));
  double total = 0.0;
  for (MarkId m = 0; m < ci.num_marks(); ++m) {
    p[static_cast<std::size_t>(m)] = ci.pdf(m, t);
    total += p[static_cast<std::size_t>(m)];
  }
  if (!(total > 0.0)) throw NumericError("total density is zero at t = " + std::to_string(t));
  for (double& v : p) v /= total;
  return p;
}

}  // namespace ifnmtpp
