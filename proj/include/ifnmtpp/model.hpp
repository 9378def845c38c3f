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

// Trainable parameter container. Parameters live in one flat vector; the
// non-negative blocks of the integral network are stored as unconstrained
// values and mapped through softplus when the model is materialized.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ifnmtpp/history_encoder.hpp"
#include "ifnmtpp/integral_net.hpp"

namespace ifnmtpp {

/// Widths follow the (history, input, layers) triple of the model config.
struct ModelShape {
  int num_marks = 1;
  int history_dim = 32;
  int input_dim = 64;
  int num_layers = 3;
  int embedding_dim = 0;  ///< 0 means "same as history_dim"

  int resolved_embedding_dim() const { return embedding_dim > 0 ? embedding_dim : history_dim; }
  void validate() const;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;
  bool nonnegative = false;

  Eigen::Index size() const { return rows * cols; }
};

/// Encoder and integral network in their evaluated (constrained) form.
struct MaterializedModel {
  EncoderParams encoder;
  IemWeights iem;
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

class IfnmtppModel {
 public:
  explicit IfnmtppModel(ModelShape shape, double epsilon = 1e-10);

  /// Seeded random initialization.
  static IfnmtppModel initialize(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  const ParamBlock& block(const std::string& name) const;
  double epsilon() const { return epsilon_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::Map<Eigen::MatrixXd> view(const std::string& name);
  Eigen::Map<const Eigen::MatrixXd> view(const std::string& name) const;

  MaterializedModel materialize() const;

  /// Maps gradients with respect to the materialized weights onto the flat
  /// parameter vector (chain rule through softplus for constrained blocks).
  Eigen::VectorXd pack_gradient(const EncoderParams& encoder_grad, const IemWeights& iem_grad) const;

  /// Sets raw parameters so that materialize() reproduces the given weights.
  /// Constrained entries must be strictly positive.
  void assign(const MaterializedModel& weights);

 private:
  void add_block(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool nonnegative);

  ModelShape shape_;
  double epsilon_;
  std::vector<ParamBlock> layout_;
  Eigen::VectorXd params_;
};

}  // namespace ifnmtpp
