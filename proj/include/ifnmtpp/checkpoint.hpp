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

// Versioned JSON checkpoints: named parameter arrays, time normalization and
// a free-form configuration echo.

#pragma once

#include <string>

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/model.hpp"

namespace ifnmtpp {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  IfnmtppModel model{ModelShape{}};
  NormalizationStats stats;
  std::string config_json = "{}";  ///< serialized JSON object
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string stats_to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const std::string& text);

}  // namespace ifnmtpp
