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

#include "ifnmtpp/model.hpp"

#include <random>

#include "ifnmtpp/error.hpp"

namespace ifnmtpp {

void ModelShape::validate() const {
  if (num_marks < 1) throw ConfigError("model needs at least one mark");
  if (history_dim < 1 || input_dim < 1 || num_layers < 1) {
    throw ConfigError("model widths and depth must be positive");
  }
  if (embedding_dim < 0) throw ConfigError("embedding_dim must be non-negative");
}

IfnmtppModel::IfnmtppModel(ModelShape shape, double epsilon) : shape_(shape), epsilon_(epsilon) {
  shape_.validate();
  const Eigen::Index m = shape_.num_marks;
  const Eigen::Index dh = shape_.history_dim;
  const Eigen::Index de = shape_.resolved_embedding_dim();
  const Eigen::Index df = shape_.input_dim;
  add_block("enc.embedding", de, m, false);
  add_block("enc.input_weights", 4 * dh, de + 1, false);
  add_block("enc.recurrent_weights", 4 * dh, dh, false);
  add_block("enc.bias", 4 * dh, 1, false);
  add_block("iem.slopes", df, m, true);
  add_block("iem.offsets", df, m, false);
  add_block("iem.conditioning", df, dh, false);
  for (int k = 0; k < shape_.num_layers; ++k) {
    add_block("iem.layer" + std::to_string(k) + ".weight", df, df, true);
    add_block("iem.layer" + std::to_string(k) + ".bias", df, 1, false);
  }
  add_block("iem.aggregation", df, 1, true);
  add_block("iem.aggregation_bias", 1, 1, false);
  params_ = Eigen::VectorXd::Zero(layout_.back().offset + layout_.back().size());
}

void IfnmtppModel::add_block(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                             bool nonnegative) {
  const Eigen::Index offset = layout_.empty() ? 0 : layout_.back().offset + layout_.back().size();
  layout_.push_back({name, rows, cols, offset, nonnegative});
}

const ParamBlock& IfnmtppModel::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw ConfigError("unknown parameter block '" + name + "'");
}

Eigen::Map<Eigen::MatrixXd> IfnmtppModel::view(const std::string& name) {
  const ParamBlock& b = block(name);
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::MatrixXd> IfnmtppModel::view(const std::string& name) const {
  const ParamBlock& b = block(name);
  return {params_.data() + b.offset, b.rows, b.cols};
}

IfnmtppModel IfnmtppModel::initialize(const ModelShape& shape, std::uint64_t seed) {
  IfnmtppModel model(shape);
  std::mt19937_64 rng(seed);
  const auto fill_uniform = [&](Eigen::Map<Eigen::MatrixXd> m, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  // Constrained blocks are drawn in weight space and mapped back to raw values.
  const auto fill_positive = [&](Eigen::Map<Eigen::MatrixXd> m, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = inverse_softplus(u(rng));
  };
  const double dh = shape.history_dim;
  const double df = shape.input_dim;
  const double enc_scale = 1.0 / std::sqrt(dh);

  fill_uniform(model.view("enc.embedding"), -enc_scale, enc_scale);
  fill_uniform(model.view("enc.input_weights"), -enc_scale, enc_scale);
  fill_uniform(model.view("enc.recurrent_weights"), -enc_scale, enc_scale);
  auto bias = model.view("enc.bias");
  bias.setZero();
  bias.middleRows(shape.history_dim, shape.history_dim).setOnes();  // forget gate

  fill_positive(model.view("iem.slopes"), 0.05, 1.0);
  fill_uniform(model.view("iem.offsets"), -1.0, 1.0);
  fill_uniform(model.view("iem.conditioning"), -enc_scale, enc_scale);
  for (int k = 0; k < shape.num_layers; ++k) {
    fill_positive(model.view("iem.layer" + std::to_string(k) + ".weight"), 0.01 / df, 3.0 / df);
    fill_uniform(model.view("iem.layer" + std::to_string(k) + ".bias"), -0.5, 0.5);
  }
  fill_positive(model.view("iem.aggregation"), 0.01 / df, 8.0 / df);
  model.view("iem.aggregation_bias").setZero();
  return model;
}

MaterializedModel IfnmtppModel::materialize() const {
  MaterializedModel out;
  out.encoder.embedding = view("enc.embedding");
  out.encoder.input_weights = view("enc.input_weights");
  out.encoder.recurrent_weights = view("enc.recurrent_weights");
  out.encoder.bias = view("enc.bias");

  const auto positive = [](const Eigen::Map<const Eigen::MatrixXd>& raw) {
    return raw.unaryExpr([](double x) { return softplus(x); }).eval();
  };
  IemWeights& w = out.iem;
  w.slopes = positive(view("iem.slopes"));
  w.offsets = view("iem.offsets");
  w.conditioning = view("iem.conditioning");
  for (int k = 0; k < shape_.num_layers; ++k) {
    w.layers.push_back(positive(view("iem.layer" + std::to_string(k) + ".weight")));
    w.layer_biases.push_back(view("iem.layer" + std::to_string(k) + ".bias"));
  }
  w.aggregation = positive(view("iem.aggregation"));
  w.aggregation_bias = view("iem.aggregation_bias")(0, 0);
  w.epsilon = epsilon_;
  return out;
}

Eigen::VectorXd IfnmtppModel::pack_gradient(const EncoderParams& eg, const IemWeights& ig) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params_.size());
  const auto put = [&](const std::string& name, const Eigen::MatrixXd& grad) {
    const ParamBlock& b = block(name);
    Eigen::Map<Eigen::MatrixXd> dst(g.data() + b.offset, b.rows, b.cols);
    if (b.nonnegative) {
      const Eigen::Map<const Eigen::MatrixXd> raw(params_.data() + b.offset, b.rows, b.cols);
      dst = grad.cwiseProduct(raw.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }));
    } else {
      dst = grad;
    }
  };
  put("enc.embedding", eg.embedding);
  put("enc.input_weights", eg.input_weights);
  put("enc.recurrent_weights", eg.recurrent_weights);
  put("enc.bias", eg.bias);
  put("iem.slopes", ig.slopes);
  put("iem.offsets", ig.offsets);
  put("iem.conditioning", ig.conditioning);
  for (int k = 0; k < shape_.num_layers; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    put("iem.layer" + std::to_string(k) + ".weight", ig.layers[ks]);
    put("iem.layer" + std::to_string(k) + ".bias", ig.layer_biases[ks]);
  }
  put("iem.aggregation", ig.aggregation);
  put("iem.aggregation_bias", Eigen::MatrixXd::Constant(1, 1, ig.aggregation_bias));
  return g;
}

void IfnmtppModel::assign(const MaterializedModel& weights) {
  const auto set = [&](const std::string& name, const Eigen::MatrixXd& value) {
    const ParamBlock& b = block(name);
    if (value.rows() != b.rows || value.cols() != b.cols) {
      throw ConfigError("shape mismatch assigning block '" + name + "'");
    }
    auto dst = view(name);
    if (b.nonnegative) {
      if ((value.array() <= 0.0).any()) {
        throw ConfigError("block '" + name + "' needs strictly positive weights");
      }
      dst = value.unaryExpr([](double y) { return inverse_softplus(y); });
    } else {
      dst = value;
    }
  };
  const auto& e = weights.encoder;
  const auto& w = weights.iem;
  set("enc.embedding", e.embedding);
  set("enc.input_weights", e.input_weights);
  set("enc.recurrent_weights", e.recurrent_weights);
  set("enc.bias", e.bias);
  set("iem.slopes", w.slopes);
  set("iem.offsets", w.offsets);
  set("iem.conditioning", w.conditioning);
  for (int k = 0; k < shape_.num_layers; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    set("iem.layer" + std::to_string(k) + ".weight", w.layers.at(ks));
    set("iem.layer" + std::to_string(k) + ".bias", w.layer_biases.at(ks));
  }
  set("iem.aggregation", w.aggregation);
  set("iem.aggregation_bias", Eigen::MatrixXd::Constant(1, 1, w.aggregation_bias));
  epsilon_ = w.epsilon;
}

}  // namespace ifnmtpp
