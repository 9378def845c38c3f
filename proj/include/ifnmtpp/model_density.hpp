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

// Adapts a trained model to the DensityModel interface in raw time units.

#pragma once

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/density.hpp"
#include "ifnmtpp/model.hpp"

namespace ifnmtpp {

class ModelDensity final : public DensityModel {
 public:
  ModelDensity(MaterializedModel weights, NormalizationStats stats);
  ModelDensity(const IfnmtppModel& model, NormalizationStats stats)
      : ModelDensity(model.materialize(), stats) {}

  int num_marks() const override { return weights_.iem.num_marks(); }
  /// `seq` is in raw units; it is normalized internally.
  std::vector<std::unique_ptr<PrefixDensity>> prefixes(const EventSequence& seq) const override;

  const MaterializedModel& weights() const { return weights_; }
  const NormalizationStats& stats() const { return stats_; }

 private:
  MaterializedModel weights_;
  NormalizationStats stats_;
};

}  // namespace ifnmtpp
