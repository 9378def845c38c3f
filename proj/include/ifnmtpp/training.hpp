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

// Exact negative log-likelihood of event sequences and its gradient.
//
// For a sequence with events (m_i, t_i), i = 1..n, on the window [t_0, T]:
//
//   L = -sum_i log p(m_i, t_i | h_{i-1}) - log sum_m Gamma(m, T | h_n)
//
// where p = -dGamma/dt. Because the loss contains a time derivative of the
// network output, parameter gradients are reverse-mode sweeps over the
// combined value + tangent computation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ifnmtpp/core_data.hpp"
#include "ifnmtpp/model.hpp"

namespace ifnmtpp {

/// Densities below this value are floored before taking logs.
inline constexpr double kDensityFloor = 1e-30;

struct LossBreakdown {
  double event_term = 0.0;
  double survival_term = 0.0;
  double total = 0.0;
  std::size_t num_events = 0;
  std::size_t floored = 0;  ///< events whose density hit kDensityFloor
};

/// Loss of one sequence; when both gradient pointers are non-null the
/// gradients with respect to the materialized weights are accumulated there.
LossBreakdown sequence_loss(const EventSequence& seq, const MaterializedModel& weights,
                            EncoderParams* encoder_grad = nullptr, IemWeights* iem_grad = nullptr);

LossBreakdown nll_loss(const EventSequence& seq, const IfnmtppModel& model);

struct BatchGradient {
  Eigen::VectorXd gradient;  ///< d(mean per-sequence loss)/d(parameters)
  LossBreakdown loss;        ///< summed over the batch
  double mean_loss = 0.0;
};

/// Throws std::invalid_argument on an empty batch and NumericError on a
/// non-finite gradient.
BatchGradient loss_gradients(std::span<const EventSequence> batch, const IfnmtppModel& model);
BatchGradient loss_gradients(std::span<const EventSequence* const> batch, const IfnmtppModel& model);

/// Mean per-event total loss over a dataset (events + survival terms divided
/// by the number of events).
double dataset_nll(const Dataset& ds, const MaterializedModel& weights);

struct TrainConfig {
  int total_steps = 100000;
  int warmup_steps = 20000;
  int batch_size = 32;
  double learning_rate = 0.002;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int eval_every = 500;
  std::size_t max_val_sequences = 0;  ///< 0 evaluates the full validation split

  void validate() const;
};

struct TrainLogRow {
  int step = 0;
  double train_nll = 0.0;  ///< mean per-event loss over batches since the previous row
  double val_nll = 0.0;
};

struct TrainResult {
  IfnmtppModel model;  ///< best validation checkpoint
  std::vector<TrainLogRow> history;
  int best_step = 0;
  double best_val_nll = 0.0;
  bool diverged = false;
  std::size_t skipped_steps = 0;  ///< steps dropped for non-finite gradients
};

using TrainCallback = std::function<void(const TrainLogRow&)>;

/// Adam with linear warmup to the configured rate, then constant. Starts from
/// `initial` when given, otherwise from a seeded initialization of `shape`.
TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ModelShape& shape,
                  const TrainConfig& config, std::optional<IfnmtppModel> initial = std::nullopt,
                  const TrainCallback& on_eval = {});

std::string history_csv(const std::vector<TrainLogRow>& history);

}  // namespace ifnmtpp
