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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/synthgen.hpp"
#include "ifnmtpp/training.hpp"
#include "test_util.hpp"

using namespace ifnmtpp;

namespace {

ModelShape tiny_shape() {
  ModelShape s;
  s.num_marks = 2;
  s.history_dim = 4;
  s.input_dim = 4;
  s.num_layers = 2;
  return s;
}

EventSequence three_events(double t_end) {
  EventSequence seq;
  seq.t_start = 0.0;
  seq.events = {{0, 0.4}, {1, 1.1}, {1, 1.5}};
  seq.t_end = t_end;
  return seq;
}

double loss_at(const IfnmtppModel& model, const std::vector<EventSequence>& batch) {
  double total = 0.0;
  for (const auto& s : batch) total += nll_loss(s, model).total;
  return total / static_cast<double>(batch.size());
}

double max_rel_error(IfnmtppModel model, const std::vector<EventSequence>& batch) {
  const Eigen::VectorXd g = loss_gradients(std::span<const EventSequence>(batch), model).gradient;
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) {
    const double keep = model.parameters()(i);
    model.parameters()(i) = keep + h;
    const double up = loss_at(model, batch);
    model.parameters()(i) = keep - h;
    const double down = loss_at(model, batch);
    model.parameters()(i) = keep;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g(i)), 1e-6});
    worst = std::max(worst, std::abs(fd - g(i)) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("gradient matches central differences without survival term") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = IfnmtppModel::initialize(tiny_shape(), seed);
    CHECK(max_rel_error(model, {three_events(1.5)}) <= 1e-4);
  }
}

TEST_CASE("gradient matches central differences with survival term") {
  for (std::uint64_t seed : {4u, 5u}) {
    const auto model = IfnmtppModel::initialize(tiny_shape(), seed);
    CHECK(max_rel_error(model, {three_events(2.7), three_events(1.5)}) <= 1e-4);
  }
}

TEST_CASE("survival term vanishes at the last event and grows with the horizon") {
  for (std::uint64_t seed : {6u, 7u, 8u}) {
    const auto model = ifnmtpp::testing::random_model(tiny_shape(), seed);
    CHECK(std::abs(nll_loss(three_events(1.5), model).survival_term) <= 1e-9);
    double prev = 0.0;
    for (double t_end = 1.6; t_end < 12.0; t_end += 0.4) {
      const auto l = nll_loss(three_events(t_end), model);
      CHECK(l.survival_term >= prev);
      CHECK(l.total == doctest::Approx(l.event_term + l.survival_term).epsilon(1e-14));
      prev = l.survival_term;
    }
    CHECK(prev > 0.0);
  }
}

TEST_CASE("single event on a one-unit network by hand") {
  ModelShape shape;
  shape.num_marks = 1;
  shape.history_dim = 1;
  shape.input_dim = 1;
  shape.num_layers = 1;
  IfnmtppModel model(shape);
  // Zero encoder: every gate sits at one half and the cell stays 0, so h = 0.
  MaterializedModel w{EncoderParams::zeros(1, 1, 1), IemWeights::zeros(1, 1, 1, 1)};
  const double v = 0.8, b = -0.3, wl = 1.5, c = 0.2, agg = 2.0, beta = -1.0;
  w.iem.slopes(0, 0) = v;
  w.iem.offsets(0, 0) = b;
  w.iem.conditioning(0, 0) = 0.7;
  w.iem.layers[0](0, 0) = wl;
  w.iem.layer_biases[0](0) = c;
  w.iem.aggregation(0) = agg;
  w.iem.aggregation_bias = beta;
  model.assign(w);

  auto score = [&](double dt) {
    const double a = std::tanh(wl * (v * dt + b) + c);
    return 1.0 / (1.0 + std::exp(agg * a + beta));
  };
  const double s0 = score(0.0);
  const double tail = 1.0 / (1.0 + std::exp(agg + beta));
  const double z = s0 - tail + model.epsilon();

  EventSequence seq;
  seq.events = {{0, 0.7}};
  seq.t_end = 1.9;
  const double dt = 0.7;
  const double a = std::tanh(wl * (v * dt + b) + c);
  const double s = score(dt);
  const double pdf = s * (1.0 - s) * agg * (1.0 - a * a) * wl * v / z;
  const double survival = -std::log((score(1.9 - 0.7) - tail) / z);

  const auto l = nll_loss(seq, model);
  CHECK(l.event_term == doctest::Approx(-std::log(pdf)).epsilon(1e-12));
  CHECK(l.survival_term == doctest::Approx(survival).epsilon(1e-9));
  CHECK(l.num_events == 1);
}

TEST_CASE("batch gradient edge cases") {
  const auto model = IfnmtppModel::initialize(tiny_shape(), 9);
  const std::vector<EventSequence> none;
  CHECK_THROWS_AS(loss_gradients(std::span<const EventSequence>(none), model), std::invalid_argument);

  const std::vector<EventSequence> once{three_events(2.0), three_events(1.5)};
  std::vector<EventSequence> twice = once;
  twice.insert(twice.end(), once.begin(), once.end());
  const auto g1 = loss_gradients(std::span<const EventSequence>(once), model);
  const auto g2 = loss_gradients(std::span<const EventSequence>(twice), model);
  CHECK((g1.gradient - g2.gradient).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g1.mean_loss == doctest::Approx(g2.mean_loss).epsilon(1e-14));
}

TEST_CASE("training is deterministic and a zero rate leaves the model alone") {
  const auto spec = ProcessSpec::preset("poisson");
  auto train_ds = generate_dataset(spec, 16, 12, 1);
  auto val_ds = generate_dataset(spec, 4, 12, 2);
  ModelShape shape = tiny_shape();
  shape.num_marks = 5;
  TrainConfig cfg;
  cfg.total_steps = 30;
  cfg.warmup_steps = 6;
  cfg.batch_size = 4;
  cfg.eval_every = 10;
  cfg.seed = 3;
  const auto a = train(train_ds, val_ds, shape, cfg);
  const auto b = train(train_ds, val_ds, shape, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_nll == b.history[i].train_nll);
    CHECK(a.history[i].val_nll == b.history[i].val_nll);
  }
  CHECK(a.model.parameters() == b.model.parameters());

  auto frozen = cfg;
  frozen.learning_rate = 0.0;
  const auto init = IfnmtppModel::initialize(shape, 5);
  const auto c = train(train_ds, val_ds, shape, frozen, init);
  CHECK(c.model.parameters() == init.parameters());

  auto bad = cfg;
  bad.warmup_steps = 31;
  CHECK_THROWS_AS(train(train_ds, val_ds, shape, bad), ConfigError);
  Dataset empty;
  empty.vocab_size = 5;
  CHECK_THROWS_AS(train(empty, val_ds, shape, cfg), DataError);
}
