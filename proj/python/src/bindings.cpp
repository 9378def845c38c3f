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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ifnmtpp/checkpoint.hpp"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/experiment.hpp"
#include "ifnmtpp/integral_net.hpp"
#include "ifnmtpp/model_density.hpp"
#include "ifnmtpp/sampling.hpp"
#include "ifnmtpp/synthgen.hpp"
#include "ifnmtpp/thresholding.hpp"

namespace py = pybind11;
using namespace ifnmtpp;

namespace {

using EventList = std::vector<std::pair<MarkId, double>>;

EventSequence to_sequence(const EventList& events, double t_start) {
  EventSequence seq;
  seq.t_start = t_start;
  for (const auto& [m, t] : events) seq.events.push_back({m, t});
  seq.t_end = seq.events.empty() ? t_start : seq.events.back().time;
  return seq;
}

EventList to_list(const EventSequence& seq) {
  EventList out;
  for (const auto& e : seq.events) out.emplace_back(e.mark, e.time);
  return out;
}

// A trained model with its normalization, queried one prefix at a time.
class Predictor {
  template <typename Fn>
  auto with_prefix(const EventList& history, double t_start, Fn&& fn) const {
    EventSequence seq = to_sequence(history, t_start);
    seq.t_start = ckpt_.stats.apply(seq.t_start);
    seq.t_end = ckpt_.stats.apply(seq.t_end);
    for (auto& e : seq.events) e.time = ckpt_.stats.apply(e.time);
    const auto states = encode_prefixes(seq, weights_.encoder);
    const ConditionalIntegral ci(weights_.iem, states.back());
    return fn(ci);
  }

 public:
  explicit Predictor(const std::string& checkpoint) : ckpt_(load_checkpoint(checkpoint)) {
    weights_ = ckpt_.model.materialize();
  }

  int num_marks() const { return weights_.iem.num_marks(); }

  std::vector<double> mark_prob(const EventList& history, double t_start) const {
    return with_prefix(history, t_start, [](const ConditionalIntegral& ci) { return ci.mark_prob(); });
  }

  double predict_time(const EventList& history, MarkId m, double t_start, std::uint64_t seed) const {
    SampleConfig cfg;
    cfg.seed = seed;
    const double t = with_prefix(history, t_start,
                                 [&](const ConditionalIntegral& ci) { return ifnmtpp::predict_time(ci, m, cfg); });
    return ckpt_.stats.invert(t);
  }

  double log_density(const EventList& history, MarkId m, double t, double t_start) const {
    const ModelDensity dens(weights_, ckpt_.stats);
    EventList all = history;
    all.emplace_back(m, t);
    const auto seq = to_sequence(all, t_start);
    return dens.prefixes(seq)[history.size()]->log_joint(m, t);
  }

 private:
  Checkpoint ckpt_;
  MaterializedModel weights_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Integral-free neural marked temporal point processes";

  static py::exception<Error> base(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("process_names", &ProcessSpec::preset_names);
  m.def(
      "simulate",
      [](const std::string& process, std::size_t n, std::uint64_t seed, std::uint64_t index) {
        return to_list(simulate(ProcessSpec::preset(process), n, seed, index));
      },
      py::arg("process"), py::arg("n_events"), py::arg("seed") = 0, py::arg("index") = 0,
      "Simulate one sequence; returns a list of (mark, time).");
  m.def(
      "oracle_log_density",
      [](const std::string& process, const EventList& history, MarkId mark, double t) {
        const auto spec = ProcessSpec::preset(process);
        const auto seq = to_sequence(history, 0.0);
        return OracleDensity(spec, seq, seq.size()).log_joint(mark, t);
      },
      py::arg("process"), py::arg("history"), py::arg("mark"), py::arg("t"));

  m.def(
      "calibrate_binary",
      [](const std::vector<double>& scores, const std::vector<bool>& positive) {
        std::unique_ptr<bool[]> buf(new bool[positive.size()]);
        std::copy(positive.begin(), positive.end(), buf.get());
        const auto b = calibrate_binary(scores, std::span<const bool>(buf.get(), positive.size()));
        return py::make_tuple(b.epsilon, b.f1);
      },
      py::arg("scores"), py::arg("positive"), "Returns (threshold, best F1).");
  m.def(
      "predict_mark",
      [](const std::vector<double>& pm, const std::vector<double>& prior, const std::vector<double>& epsilon) {
        auto table = ThresholdTable::zero(prior);
        table.epsilon = epsilon;
        return predict_mark(ratios(pm, prior, true), table);
      },
      py::arg("pm"), py::arg("prior"), py::arg("epsilon"));

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("num_marks", &Predictor::num_marks)
      .def("mark_prob", &Predictor::mark_prob, py::arg("history"), py::arg("t_start") = 0.0)
      .def("predict_time", &Predictor::predict_time, py::arg("history"), py::arg("mark"),
           py::arg("t_start") = 0.0, py::arg("seed") = 0)
      .def("log_density", &Predictor::log_density, py::arg("history"), py::arg("mark"), py::arg("t"),
           py::arg("t_start") = 0.0);

  // Pipeline stages take a JSON config document; they write under its "out".
  auto config = [](const std::string& text) { return config_from_json(text); };
  m.def("default_config", [] { return config_to_json(ExperimentConfig::defaults()); });
  m.def("generate", [config](const std::string& c) { cmd_generate(config(c)); }, py::arg("config"));
  m.def("preprocess", [config](const std::string& c) { cmd_preprocess(config(c)); }, py::arg("config"));
  m.def(
      "train",
      [config](const std::string& c) {
        const auto r = cmd_train(config(c));
        return py::make_tuple(r.best_step, r.best_val_nll);
      },
      py::arg("config"), "Returns (best step, best validation NLL).");
  m.def("calibrate", [config](const std::string& c) { cmd_calibrate(config(c)); }, py::arg("config"));
  m.def("evaluate", [config](const std::string& c) { return cmd_evaluate(config(c)).to_json(); }, py::arg("config"));
  m.def(
      "fidelity",
      [config](const std::string& c, bool oracle) { return fidelity_to_json(cmd_fidelity(config(c), oracle)); },
      py::arg("config"), py::arg("oracle") = false);
  m.def("checkpoint_path", [config](const std::string& c) { return config(c).checkpoint_path(); }, py::arg("config"));
}
