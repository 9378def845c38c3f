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

#include "ifnmtpp/history_encoder.hpp"

#include "ifnmtpp/error.hpp"

namespace ifnmtpp {

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

EncoderParams EncoderParams::zeros(int num_marks, int history_dim, int embedding_dim) {
  EncoderParams p;
  p.embedding = Eigen::MatrixXd::Zero(embedding_dim, num_marks);
  p.input_weights = Eigen::MatrixXd::Zero(4 * history_dim, embedding_dim + 1);
  p.recurrent_weights = Eigen::MatrixXd::Zero(4 * history_dim, history_dim);
  p.bias = Eigen::VectorXd::Zero(4 * history_dim);
  return p;
}

EncoderTrace encode(const EventSequence& seq, const EncoderParams& params) {
  const Eigen::Index d = params.history_dim();
  const Eigen::Index de = params.embedding_dim();
  const auto n = static_cast<Eigen::Index>(seq.size());

  EncoderTrace tr;
  tr.marks.reserve(seq.size());
  tr.inputs.resize(de + 1, n);
  tr.last_times.resize(seq.size() + 1);
  tr.last_times[0] = seq.t_start;
  double prev = seq.t_start;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Event& e = seq.events[static_cast<std::size_t>(i)];
    if (e.mark < 0 || e.mark >= params.num_marks()) {
      throw DataError("mark " + std::to_string(e.mark) + " outside encoder vocabulary");
    }
    tr.marks.push_back(e.mark);
    tr.inputs.col(i).head(de) = params.embedding.col(e.mark);
    tr.inputs(de, i) = e.time - prev;
    prev = e.time;
    tr.last_times[static_cast<std::size_t>(i) + 1] = e.time;
  }

  Eigen::MatrixXd pre = params.input_weights * tr.inputs;
  pre.colwise() += params.bias;
  tr.gates.resize(4 * d, n);
  tr.cells = Eigen::MatrixXd::Zero(d, n + 1);
  tr.states = Eigen::MatrixXd::Zero(d, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd z = pre.col(i) + params.recurrent_weights * tr.states.col(i);
    auto g = tr.gates.col(i);
    for (Eigen::Index k = 0; k < d; ++k) {
      g(k) = logistic(z(k));
      g(d + k) = logistic(z(d + k));
      g(2 * d + k) = std::tanh(z(2 * d + k));
      g(3 * d + k) = logistic(z(3 * d + k));
    }
    tr.cells.col(i + 1) = g.segment(d, d).cwiseProduct(tr.cells.col(i)) +
                          g.head(d).cwiseProduct(g.segment(2 * d, d));
    tr.states.col(i + 1) = g.segment(3 * d, d).cwiseProduct(tr.cells.col(i + 1).array().tanh().matrix());
  }
  return tr;
}

std::vector<HistoryState> encode_prefixes(const EventSequence& seq, const EncoderParams& params) {
  const EncoderTrace tr = encode(seq, params);
  std::vector<HistoryState> out;
  out.reserve(seq.size() + 1);
  for (std::size_t i = 0; i <= seq.size(); ++i) out.push_back(tr.state(i));
  return out;
}

void encoder_backward(const EncoderTrace& tr, const EncoderParams& params,
                      const Eigen::MatrixXd& state_grads, EncoderParams& grads) {
  const Eigen::Index d = params.history_dim();
  const Eigen::Index de = params.embedding_dim();
  const Eigen::Index n = tr.inputs.cols();
  if (n == 0) return;

  Eigen::MatrixXd dpre(4 * d, n);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto g = tr.gates.col(i);
    const auto ig = g.head(d).array();
    const auto fg = g.segment(d, d).array();
    const auto gg = g.segment(2 * d, d).array();
    const auto og = g.segment(3 * d, d).array();
    const Eigen::ArrayXd tc = tr.cells.col(i + 1).array().tanh();

    const Eigen::ArrayXd dh = (state_grads.col(i + 1) + dh_next).array();
    const Eigen::ArrayXd dc = dc_next.array() + dh * og * (1.0 - tc * tc);
    auto dp = dpre.col(i);
    dp.head(d) = (dc * gg * ig * (1.0 - ig)).matrix();
    dp.segment(d, d) = (dc * tr.cells.col(i).array() * fg * (1.0 - fg)).matrix();
    dp.segment(2 * d, d) = (dc * ig * (1.0 - gg * gg)).matrix();
    dp.segment(3 * d, d) = (dh * tc * og * (1.0 - og)).matrix();

    dc_next = (dc * fg).matrix();
    dh_next.noalias() = params.recurrent_weights.transpose() * dp;
  }

  grads.input_weights.noalias() += dpre * tr.inputs.transpose();
  grads.recurrent_weights.noalias() += dpre * tr.states.leftCols(n).transpose();
  grads.bias += dpre.rowwise().sum();
  const Eigen::MatrixXd dx = params.input_weights.transpose() * dpre;
  for (Eigen::Index i = 0; i < n; ++i) {
    grads.embedding.col(tr.marks[static_cast<std::size_t>(i)]) += dx.col(i).head(de);
  }
}

}  // namespace ifnmtpp
