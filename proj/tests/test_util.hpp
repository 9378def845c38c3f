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

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ifnmtpp/history_encoder.hpp"
#include "ifnmtpp/model.hpp"

namespace ifnmtpp::testing {

/// Seeded initialization with every raw parameter perturbed by N(0, spread).
inline IfnmtppModel random_model(const ModelShape& shape, std::uint64_t seed, double spread = 0.5) {
  IfnmtppModel m = IfnmtppModel::initialize(shape, seed);
  std::mt19937_64 rng(seed * 7919 + 17);
  std::normal_distribution<double> n(0.0, spread);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i) m.parameters()(i) += n(rng);
  return m;
}

inline HistoryState random_history(int history_dim, double t_last, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HistoryState h;
  h.h = Eigen::VectorXd::NullaryExpr(history_dim, [&] { return u(rng); });
  h.t_last = t_last;
  return h;
}

inline ModelShape shape_of(int marks, int dh, int df, int layers) {
  ModelShape s;
  s.num_marks = marks;
  s.history_dim = dh;
  s.input_dim = df;
  s.num_layers = layers;
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ifnmtpp_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ifnmtpp::testing
