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

// Recurrent history encoder: a single LSTM layer over (mark embedding, inter-event
// time) inputs producing one history state per event prefix.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ifnmtpp/core_data.hpp"

namespace ifnmtpp {

struct EncoderParams {
  Eigen::MatrixXd embedding;          ///< d_e x |M|, one column per mark
  Eigen::MatrixXd input_weights;      ///< 4 d_h x (d_e + 1), gate order [i, f, g, o]
  Eigen::MatrixXd recurrent_weights;  ///< 4 d_h x d_h
  Eigen::VectorXd bias;               ///< 4 d_h

  int num_marks() const { return static_cast<int>(embedding.cols()); }
  int embedding_dim() const { return static_cast<int>(embedding.rows()); }
  int history_dim() const { return static_cast<int>(recurrent_weights.cols()); }

  static EncoderParams zeros(int num_marks, int history_dim, int embedding_dim);
  EncoderParams zeros_like() const {
    return zeros(num_marks(), history_dim(), embedding_dim());
  }
};

struct HistoryState {
  Eigen::VectorXd h;
  double t_last = 0.0;
};

/// Forward activations of one sequence, kept for the backward pass.
struct EncoderTrace {
  std::vector<MarkId> marks;
  Eigen::MatrixXd inputs;  ///< (d_e + 1) x n
  Eigen::MatrixXd gates;   ///< 4 d_h x n, post-nonlinearity
  Eigen::MatrixXd cells;   ///< d_h x (n + 1), column 0 is the zero initial cell
  Eigen::MatrixXd states;  ///< d_h x (n + 1), column 0 is the empty-history state
  std::vector<double> last_times;  ///< t_last of each state, n + 1 entries

  HistoryState state(std::size_t i) const { return {states.col(static_cast<Eigen::Index>(i)), last_times[i]}; }
};

EncoderTrace encode(const EventSequence& seq, const EncoderParams& params);

/// One state per prefix length 0..n.
std::vector<HistoryState> encode_prefixes(const EventSequence& seq, const EncoderParams& params);

/// Accumulates into `grads` the parameter gradient of a scalar loss whose
/// gradient with respect to `trace.states` is `state_grads` (d_h x (n + 1)).
void encoder_backward(const EncoderTrace& trace, const EncoderParams& params,
                      const Eigen::MatrixXd& state_grads, EncoderParams& grads);

}  // namespace ifnmtpp
