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

#include "ifnmtpp/model_density.hpp"

#include <algorithm>
#include <cmath>

#include "ifnmtpp/history_encoder.hpp"
#include "ifnmtpp/integral_net.hpp"
#include "ifnmtpp/training.hpp"

namespace ifnmtpp {
namespace {

class ModelPrefix final : public PrefixDensity {
 public:
  ModelPrefix(const IemWeights& w, const HistoryState& h, const NormalizationStats& stats)
      : ci_(w, h), stats_(stats) {}

  double t_last() const override { return stats_.invert(ci_.t_last()); }
  int num_marks() const override { return ci_.num_marks(); }

  void marginal(std::span<const double> times, std::span<double> out) const override {
    std::vector<double> t(times.size()), p(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) t[i] = std::max(stats_.apply(times[i]), ci_.t_last());
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(times.size()), 0.0);
    for (MarkId m = 0; m < ci_.num_marks(); ++m) {
      ci_.pdf_batch(m, t, p);
      for (std::size_t i = 0; i < times.size(); ++i) out[i] += p[i] / stats_.std;
    }
  }

  double log_joint(MarkId m, double t) const override {
    const double p = ci_.pdf(m, std::max(stats_.apply(t), ci_.t_last()));
    return std::log(std::max(p, kDensityFloor)) - std::log(stats_.std);
  }

 private:
  ConditionalIntegral ci_;
  NormalizationStats stats_;
};

}  // namespace

ModelDensity::ModelDensity(MaterializedModel weights, NormalizationStats stats)
    : weights_(std::move(weights)), stats_(stats) {
  weights_.iem.check();
}

std::vector<std::unique_ptr<PrefixDensity>> ModelDensity::prefixes(const EventSequence& seq) const {
  EventSequence norm = seq;
  norm.t_start = stats_.apply(seq.t_start);
  norm.t_end = stats_.apply(seq.t_end);
  for (auto& e : norm.events) e.time = stats_.apply(e.time);
  const auto states = encode_prefixes(norm, weights_.encoder);
  std::vector<std::unique_ptr<PrefixDensity>> out;
  out.reserve(states.size());
  for (const auto& h : states) out.push_back(std::make_unique<ModelPrefix>(weights_.iem, h, stats_));
  return out;
}

}  // namespace ifnmtpp
