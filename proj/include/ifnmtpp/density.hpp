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

// Conditional next-event densities for one history, in raw time units.

#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "ifnmtpp/core_data.hpp"

namespace ifnmtpp {

/// Next-event law given the first k events of a sequence.
class PrefixDensity {
 public:
  virtual ~PrefixDensity() = default;

  virtual double t_last() const = 0;
  virtual int num_marks() const = 0;
  /// p(t) summed over marks, at absolute times t >= t_last.
  virtual void marginal(std::span<const double> times, std::span<double> out) const = 0;
  /// log p(m, t).
  virtual double log_joint(MarkId m, double t) const = 0;

  double marginal(double t) const {
    double v = 0.0;
    marginal(std::span<const double>(&t, 1), std::span<double>(&v, 1));
    return v;
  }
  double joint(MarkId m, double t) const { return std::exp(log_joint(m, t)); }
};

class DensityModel {
 public:
  virtual ~DensityModel() = default;

  virtual int num_marks() const = 0;
  /// Densities for prefixes 0..n of `seq`; element k conditions on the first
  /// k events. The returned objects may reference this model.
  virtual std::vector<std::unique_ptr<PrefixDensity>> prefixes(const EventSequence& seq) const = 0;
};

}  // namespace ifnmtpp
