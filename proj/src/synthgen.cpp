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

#include "ifnmtpp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "ifnmtpp/error.hpp"

namespace ifnmtpp {

ProcessSpec ProcessSpec::preset(const std::string& name) {
  ProcessSpec s;
  s.name = name;
  if (name == "hawkes_1") {
    s.kind = ProcessKind::kHawkes;
    s.mu0 = 0.2;
    s.kernels = {{0.8, 1.0}};
  } else if (name == "hawkes_2") {
    s.kind = ProcessKind::kHawkes;
    s.mu0 = 0.2;
    s.kernels = {{0.4, 1.0}, {0.4, 20.0}};
  } else if (name == "poisson") {
    s.kind = ProcessKind::kPoisson;
    s.rate = 1.0;
  } else if (name == "self_correct") {
    s.kind = ProcessKind::kSelfCorrect;
    s.mu = 1.0;
    s.alpha = 1.0;
  } else if (name == "renewal") {
    s.kind = ProcessKind::kRenewal;
    s.sigma = 1.0;
  } else {
    throw ConfigError("unknown process '" + name + "'");
  }
  return s;
}

const std::vector<std::string>& ProcessSpec::preset_names() {
  static const std::vector<std::string> names = {"hawkes_1", "hawkes_2", "poisson", "self_correct", "renewal"};
  return names;
}

void ProcessSpec::validate() const {
  if (n_marks < 1) throw ConfigError("n_marks must be positive");
  if (!mark_probs.empty()) {
    if (mark_probs.size() != static_cast<std::size_t>(n_marks)) {
      throw ConfigError("mark_probs must have n_marks entries");
    }
    double sum = 0.0;
    for (double p : mark_probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("mark_probs must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mark_probs must sum to one");
  }
  switch (kind) {
    case ProcessKind::kHawkes:
      if (!(mu0 > 0.0)) throw ConfigError("Hawkes baseline must be positive");
      for (const auto& k : kernels) {
        if (!(k.a > 0.0 && k.b > 0.0)) throw ConfigError("Hawkes kernel parameters must be positive");
      }
      break;
    case ProcessKind::kPoisson:
      if (!(rate > 0.0)) throw ConfigError("Poisson rate must be positive");
      break;
    case ProcessKind::kSelfCorrect:
      if (!(mu > 0.0 && alpha > 0.0)) throw ConfigError("self-correcting parameters must be positive");
      break;
    case ProcessKind::kRenewal:
      if (!(sigma > 0.0)) throw ConfigError("renewal sigma must be positive");
      break;
  }
}

double ProcessSpec::mark_prob(MarkId m) const {
  if (m < 0 || m >= n_marks) throw std::invalid_argument("mark out of range");
  return mark_probs.empty() ? 1.0 / n_marks : mark_probs[static_cast<std::size_t>(m)];
}

double ProcessSpec::stationary_rate() const {
  if (kind == ProcessKind::kPoisson) return rate;
  if (kind == ProcessKind::kHawkes) {
    double branching = 0.0;
    for (const auto& k : kernels) branching += k.a / k.b;
    return branching < 1.0 ? mu0 / (1.0 - branching) : std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

std::mt19937_64 sequence_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double unit_exponential(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  return e(rng);
}

}  // namespace

EventSequence simulate(const ProcessSpec& spec, std::size_t seq_len, std::uint64_t seed, std::uint64_t index) {
  spec.validate();
  if (seq_len < 1) throw ConfigError("sequence length must be at least 1");
  auto rng = sequence_rng(seed, index);
  EventSequence seq;
  seq.events.reserve(seq_len);
  std::discrete_distribution<int> mark_dist =
      spec.mark_probs.empty() ? std::discrete_distribution<int>(static_cast<std::size_t>(spec.n_marks), 0.0, 1.0,
                                                                [](double) { return 1.0; })
                              : std::discrete_distribution<int>(spec.mark_probs.begin(), spec.mark_probs.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::lognormal_distribution<double> lognormal(0.0, spec.sigma);

  double t = 0.0;
  std::vector<double> excitation(spec.kernels.size(), 0.0);
  while (seq.events.size() < seq_len) {
    switch (spec.kind) {
      case ProcessKind::kPoisson:
        t += unit_exponential(rng) / spec.rate;
        break;
      case ProcessKind::kRenewal:
        t += lognormal(rng);
        break;
      case ProcessKind::kSelfCorrect: {
        // Invert exp(-alpha N) (exp(mu d) - 1) / mu = E.
        const double n = static_cast<double>(seq.events.size());
        const double z = std::log(spec.mu * unit_exponential(rng)) + spec.alpha * n;
        t += softplus(z) / spec.mu;
        break;
      }
      case ProcessKind::kHawkes: {
        for (;;) {
          double bound = spec.mu0;
          for (std::size_t k = 0; k < excitation.size(); ++k) bound += spec.kernels[k].a * excitation[k];
          const double w = unit_exponential(rng) / bound;
          t += w;
          double lambda = spec.mu0;
          for (std::size_t k = 0; k < excitation.size(); ++k) {
            excitation[k] *= std::exp(-spec.kernels[k].b * w);
            lambda += spec.kernels[k].a * excitation[k];
          }
          if (unif(rng) * bound <= lambda) break;
        }
        for (double& e : excitation) e += 1.0;
        break;
      }
    }
    if (!std::isfinite(t)) throw NumericError("simulated time overflowed");
    if (!seq.events.empty() && !(t > seq.events.back().time)) {
      throw NumericError("simulated inter-event time underflowed");
    }
    seq.events.push_back({mark_dist(rng), t});
  }
  seq.t_start = 0.0;
  seq.t_end = seq.events.back().time;
  return seq;
}

Dataset generate_dataset(const ProcessSpec& spec, std::size_t n_sequences, std::size_t seq_len,
                         std::uint64_t seed, std::size_t index_offset) {
  spec.validate();
  Dataset ds;
  ds.vocab_size = spec.n_marks;
  ds.sequences.reserve(n_sequences);
  for (std::size_t i = 0; i < n_sequences; ++i) {
    ds.sequences.push_back(simulate(spec, seq_len, seed, static_cast<std::uint64_t>(index_offset + i)));
  }
  return ds;
}

GeneratedSplits generate_splits(const ProcessSpec& spec, const SplitSizes& sizes, std::uint64_t seed) {
  GeneratedSplits out;
  out.train = generate_dataset(spec, sizes.train, sizes.seq_len, seed, 0);
  out.val = generate_dataset(spec, sizes.val, sizes.seq_len, seed, sizes.train);
  out.test = generate_dataset(spec, sizes.test, sizes.seq_len, seed, sizes.train + sizes.val);
  out.train.split = Split::kTrain;
  out.val.split = Split::kVal;
  out.test.split = Split::kTest;
  return out;
}

OracleDensity::OracleDensity(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix)
    : spec_(spec) {
  spec_.validate();
  if (prefix > seq.size()) throw std::invalid_argument("prefix longer than sequence");
  t_last_ = seq.last_time(prefix);
  count_ = static_cast<double>(prefix);
  excitation_.assign(spec_.kernels.size(), 0.0);
  if (spec_.kind == ProcessKind::kHawkes) {
    for (std::size_t k = 0; k < spec_.kernels.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < prefix; ++i) s += std::exp(-spec_.kernels[k].b * (t_last_ - seq.events[i].time));
      excitation_[k] = s;
    }
  }
}

void OracleDensity::check_time(double t) const {
  if (!(t >= t_last_)) throw std::invalid_argument("oracle evaluated before the last event");
}

double OracleDensity::intensity(double t) const {
  check_time(t);
  const double d = t - t_last_;
  switch (spec_.kind) {
    case ProcessKind::kPoisson:
      return spec_.rate;
    case ProcessKind::kHawkes: {
      double lambda = spec_.mu0;
      for (std::size_t k = 0; k < excitation_.size(); ++k) {
        lambda += spec_.kernels[k].a * excitation_[k] * std::exp(-spec_.kernels[k].b * d);
      }
      return lambda;
    }
    case ProcessKind::kSelfCorrect:
      return std::exp(spec_.mu * d - spec_.alpha * count_);
    case ProcessKind::kRenewal:
      if (d <= 0.0) return 0.0;
      return std::exp(log_density(t) + compensator(t));
  }
  return 0.0;
}

double OracleDensity::compensator(double t) const {
  check_time(t);
  const double d = t - t_last_;
  switch (spec_.kind) {
    case ProcessKind::kPoisson:
      return spec_.rate * d;
    case ProcessKind::kHawkes: {
      double c = spec_.mu0 * d;
      for (std::size_t k = 0; k < excitation_.size(); ++k) {
        const auto& ker = spec_.kernels[k];
        c += ker.a / ker.b * excitation_[k] * -std::expm1(-ker.b * d);
      }
      return c;
    }
    case ProcessKind::kSelfCorrect:
      return -std::exp(spec_.mu * d - spec_.alpha * count_) * std::expm1(-spec_.mu * d) / spec_.mu;
    case ProcessKind::kRenewal: {
      if (d <= 0.0) return 0.0;
      const double z = std::log(d) / spec_.sigma;
      return -std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    }
  }
  return 0.0;
}

double OracleDensity::log_density(double t) const {
  check_time(t);
  const double d = t - t_last_;
  switch (spec_.kind) {
    case ProcessKind::kSelfCorrect:
      return spec_.mu * d - spec_.alpha * count_ - compensator(t);
    case ProcessKind::kRenewal: {
      if (d <= 0.0) return -std::numeric_limits<double>::infinity();
      const double l = std::log(d);
      return -std::log(spec_.sigma * d * std::sqrt(2.0 * std::numbers::pi)) -
             l * l / (2.0 * spec_.sigma * spec_.sigma);
    }
    default:
      return std::log(intensity(t)) - compensator(t);
  }
}

void OracleDensity::marginal(std::span<const double> times, std::span<double> out) const {
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = density(times[i]);
}

double OracleDensity::log_joint(MarkId m, double t) const {
  const double q = spec_.mark_prob(m);
  return log_density(t) + std::log(q);
}

double OracleDensity::quantile(double q) const {
  if (!(q >= 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1)");
  const double target = -std::log1p(-q);
  switch (spec_.kind) {
    case ProcessKind::kPoisson:
      return t_last_ + target / spec_.rate;
    case ProcessKind::kSelfCorrect:
      return t_last_ + softplus(std::log(spec_.mu * target) + spec_.alpha * count_) / spec_.mu;
    case ProcessKind::kRenewal: {
      if (q == 0.0) return t_last_;
      const boost::math::normal_distribution<double> n(0.0, spec_.sigma);
      return t_last_ + std::exp(boost::math::quantile(n, q));
    }
    case ProcessKind::kHawkes: {
      double lo = 0.0, hi = 1.0;
      while (compensator(t_last_ + hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericError("oracle quantile bracket overflowed");
      }
      for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (compensator(t_last_ + mid) < target ? lo : hi) = mid;
      }
      return t_last_ + 0.5 * (lo + hi);
    }
  }
  return t_last_;
}

std::vector<std::unique_ptr<PrefixDensity>> OracleModel::prefixes(const EventSequence& seq) const {
  std::vector<std::unique_ptr<PrefixDensity>> out;
  out.reserve(seq.size() + 1);
  for (std::size_t k = 0; k <= seq.size(); ++k) out.push_back(std::make_unique<OracleDensity>(spec_, seq, k));
  return out;
}

double oracle_intensity(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t) {
  return OracleDensity(spec, seq, prefix).intensity(t);
}

double oracle_compensator(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t) {
  return OracleDensity(spec, seq, prefix).compensator(t);
}

double oracle_density(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t) {
  return OracleDensity(spec, seq, prefix).density(t);
}

double oracle_joint(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, MarkId m, double t) {
  return OracleDensity(spec, seq, prefix).joint(m, t);
}

double oracle_quantile(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double q) {
  return OracleDensity(spec, seq, prefix).quantile(q);
}

}  // namespace ifnmtpp
