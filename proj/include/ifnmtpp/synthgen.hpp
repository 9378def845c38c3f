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

// Synthetic point processes with uniform (or user-weighted) independent marks,
// and their exact conditional densities.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/density.hpp"

namespace ifnmtpp {

enum class ProcessKind { kHawkes, kPoisson, kSelfCorrect, kRenewal };

struct ExpKernel {
  double a = 0.0;  ///< jump size
  double b = 1.0;  ///< decay rate
};

struct ProcessSpec {
  std::string name;
  ProcessKind kind = ProcessKind::kPoisson;
  double mu0 = 0.2;                 ///< Hawkes baseline
  std::vector<ExpKernel> kernels;   ///< Hawkes excitation
  double rate = 1.0;                ///< Poisson
  double mu = 1.0, alpha = 1.0;     ///< self-correcting
  double sigma = 1.0;               ///< renewal (lognormal)
  int n_marks = 5;
  std::vector<double> mark_probs;   ///< empty means uniform

  /// hawkes_1, hawkes_2, poisson, self_correct or renewal.
  static ProcessSpec preset(const std::string& name);
  static const std::vector<std::string>& preset_names();

  void validate() const;
  /// Probability of mark m.
  double mark_prob(MarkId m) const;
  /// Long-run event rate for Hawkes and Poisson; NaN otherwise.
  double stationary_rate() const;
};

/// One sequence of `seq_len` events starting at t = 0, drawn from the random
/// stream keyed on (seed, index). The observation window ends at the last
/// event.
EventSequence simulate(const ProcessSpec& spec, std::size_t seq_len, std::uint64_t seed,
                       std::uint64_t index = 0);

/// Sequence i is simulate(spec, seq_len, seed, index_offset + i).
Dataset generate_dataset(const ProcessSpec& spec, std::size_t n_sequences, std::size_t seq_len,
                         std::uint64_t seed, std::size_t index_offset = 0);

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t val = 400;
  std::size_t test = 400;
  std::size_t seq_len = 100;
};

struct GeneratedSplits {
  Dataset train, val, test;
};

/// Index offsets are contiguous across splits so no two sequences share a seed.
GeneratedSplits generate_splits(const ProcessSpec& spec, const SplitSizes& sizes, std::uint64_t seed);

/// Exact law of the next event after the first `prefix` events of `seq`.
class OracleDensity final : public PrefixDensity {
 public:
  OracleDensity(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix);

  double t_last() const override { return t_last_; }
  int num_marks() const override { return spec_.n_marks; }
  void marginal(std::span<const double> times, std::span<double> out) const override;
  double log_joint(MarkId m, double t) const override;
  using PrefixDensity::marginal;

  double intensity(double t) const;
  /// Integral of the intensity over [t_last, t].
  double compensator(double t) const;
  double log_density(double t) const;
  double density(double t) const { return std::exp(log_density(t)); }
  /// Smallest t with P(next event <= t) >= q.
  double quantile(double q) const;

 private:
  void check_time(double t) const;

  ProcessSpec spec_;
  double t_last_ = 0.0;
  double count_ = 0.0;               ///< events so far
  std::vector<double> excitation_;   ///< per kernel: sum_i exp(-b (t_last - t_i))
};

class OracleModel final : public DensityModel {
 public:
  explicit OracleModel(ProcessSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  int num_marks() const override { return spec_.n_marks; }
  std::vector<std::unique_ptr<PrefixDensity>> prefixes(const EventSequence& seq) const override;
  const ProcessSpec& spec() const { return spec_; }

 private:
  ProcessSpec spec_;
};

double oracle_intensity(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t);
double oracle_compensator(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t);
double oracle_density(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double t);
double oracle_joint(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, MarkId m, double t);
double oracle_quantile(const ProcessSpec& spec, const EventSequence& seq, std::size_t prefix, double q);

}  // namespace ifnmtpp
