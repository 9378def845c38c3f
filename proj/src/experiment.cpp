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

#include "ifnmtpp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/history_encoder.hpp"
#include "ifnmtpp/integral_net.hpp"
#include "ifnmtpp/io_util.hpp"
#include "ifnmtpp/model_density.hpp"
#include "json.hpp"

namespace ifnmtpp {

using nlohmann::json;

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

void ExperimentConfig::apply_tiny() {
  shape.history_dim = 8;
  shape.input_dim = 8;
  shape.num_layers = 2;
  shape.embedding_dim = 0;
  set_steps(2000);
}

void ExperimentConfig::set_steps(int steps) {
  train.total_steps = steps;
  if (!warmup_explicit) train.warmup_steps = steps / 5;
}

std::optional<ProcessSpec> ExperimentConfig::process_spec() const {
  if (process.empty()) return std::nullopt;
  ProcessSpec spec = ProcessSpec::preset(process);
  if (!mark_probs.empty()) {
    spec.mark_probs = mark_probs;
    spec.n_marks = static_cast<int>(mark_probs.size());
  }
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  if (out.empty()) throw ConfigError("output directory is empty");
  if (process.empty() && train_path.empty()) throw ConfigError("either a process or data paths are required");
  validate_settings();
}

void ExperimentConfig::validate_settings() const {
  if (!process.empty()) process_spec();
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0 || sizes.seq_len == 0) {
    throw ConfigError("split sizes and sequence length must be positive");
  }
  ModelShape s = shape;
  s.num_marks = std::max(1, s.num_marks);
  s.validate();
  train.validate();
  sample.validate();
  for (auto m : rare_marks) {
    if (m < 0) throw ConfigError("rare marks must be non-negative");
  }
  if (!(fidelity.mass > 0.0 && fidelity.mass < 1.0) || fidelity.grid_points < 2) {
    throw ConfigError("invalid fidelity settings");
  }
}

std::filesystem::path ExperimentConfig::raw_path(Split split) const {
  const auto& given = split == Split::kTrain ? train_path : split == Split::kVal ? val_path : test_path;
  if (!given.empty()) return given;
  return out / "data" / (to_string(split) + ".jsonl");
}

std::filesystem::path ExperimentConfig::prep_path(Split split) const {
  return out / "prep" / (to_string(split) + ".jsonl");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) ==
        allowed.end()) {
      throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

std::string resampling_name(Resampling r) {
  switch (r) {
    case Resampling::kOversample:
      return "oversample";
    case Resampling::kUndersample:
      return "undersample";
    default:
      return "none";
  }
}

Resampling resampling_from(const std::string& s) {
  if (s == "none") return Resampling::kNone;
  if (s == "oversample") return Resampling::kOversample;
  if (s == "undersample") return Resampling::kUndersample;
  throw ConfigError("unknown resampling '" + s + "'");
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(j,
                   {"seed", "out", "process", "generate", "data", "normalize", "resample", "model", "train", "sample",
                    "rare_marks", "evaluate", "fidelity"},
                   "config");
    read(j, "seed", cfg.seed);
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    read(j, "process", cfg.process);
    if (j.contains("generate")) {
      const auto& g = j.at("generate");
      reject_unknown(g, {"train", "val", "test", "seq_len", "mark_probs"}, "generate");
      read(g, "train", cfg.sizes.train);
      read(g, "val", cfg.sizes.val);
      read(g, "test", cfg.sizes.test);
      read(g, "seq_len", cfg.sizes.seq_len);
      read(g, "mark_probs", cfg.mark_probs);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"train", "val", "test"}, "data");
      if (d.contains("train")) cfg.train_path = d.at("train").get<std::string>();
      if (d.contains("val")) cfg.val_path = d.at("val").get<std::string>();
      if (d.contains("test")) cfg.test_path = d.at("test").get<std::string>();
    }
    if (j.contains("normalize")) {
      if (j.at("normalize").is_null()) {
        cfg.normalize.reset();
      } else {
        cfg.normalize = j.at("normalize").get<bool>();
      }
    }
    if (j.contains("resample")) cfg.resample = resampling_from(j.at("resample").get<std::string>());
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"history_dim", "input_dim", "num_layers", "embedding_dim"}, "model");
      read(m, "history_dim", cfg.shape.history_dim);
      read(m, "input_dim", cfg.shape.input_dim);
      read(m, "num_layers", cfg.shape.num_layers);
      read(m, "embedding_dim", cfg.shape.embedding_dim);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, {"steps", "warmup_steps", "batch_size", "learning_rate", "eval_every", "max_val_sequences"},
                     "train");
      if (t.contains("warmup_steps")) {
        cfg.train.warmup_steps = t.at("warmup_steps").get<int>();
        cfg.warmup_explicit = true;
      }
      if (t.contains("steps")) cfg.set_steps(t.at("steps").get<int>());
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "eval_every", cfg.train.eval_every);
      read(t, "max_val_sequences", cfg.train.max_val_sequences);
    }
    if (j.contains("sample")) {
      const auto& s = j.at("sample");
      reject_unknown(s, {"n_samples", "u_max", "bisection_tol", "max_bisection_iters"}, "sample");
      read(s, "n_samples", cfg.sample.n_samples);
      read(s, "u_max", cfg.sample.u_max);
      read(s, "bisection_tol", cfg.sample.bisection_tol);
      read(s, "max_bisection_iters", cfg.sample.max_bisection_iters);
    }
    read(j, "rare_marks", cfg.rare_marks);
    if (j.contains("evaluate")) {
      const auto& e = j.at("evaluate");
      reject_unknown(e, {"max_prefixes", "calibration_prefixes"}, "evaluate");
      read(e, "max_prefixes", cfg.max_eval_prefixes);
      read(e, "calibration_prefixes", cfg.max_calibration_prefixes);
    }
    if (j.contains("fidelity")) {
      const auto& f = j.at("fidelity");
      reject_unknown(f, {"grid_points", "mass", "max_prefixes"}, "fidelity");
      read(f, "grid_points", cfg.fidelity.grid_points);
      read(f, "mass", cfg.fidelity.mass);
      read(f, "max_prefixes", cfg.fidelity.max_prefixes);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  cfg.validate_settings();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return config_from_json(read_file(path));
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out.string();
  j["process"] = cfg.process;
  j["generate"] = {{"train", cfg.sizes.train},
                   {"val", cfg.sizes.val},
                   {"test", cfg.sizes.test},
                   {"seq_len", cfg.sizes.seq_len},
                   {"mark_probs", cfg.mark_probs}};
  j["data"] = {{"train", cfg.raw_path(Split::kTrain).string()},
               {"val", cfg.raw_path(Split::kVal).string()},
               {"test", cfg.raw_path(Split::kTest).string()}};
  j["normalize"] = cfg.normalized();
  j["resample"] = resampling_name(cfg.resample);
  j["model"] = {{"history_dim", cfg.shape.history_dim},
                {"input_dim", cfg.shape.input_dim},
                {"num_layers", cfg.shape.num_layers},
                {"embedding_dim", cfg.shape.resolved_embedding_dim()}};
  j["train"] = {{"steps", cfg.train.total_steps},
                {"warmup_steps", cfg.train.warmup_steps},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"eval_every", cfg.train.eval_every},
                {"max_val_sequences", cfg.train.max_val_sequences}};
  j["sample"] = {{"n_samples", cfg.sample.n_samples},
                 {"u_max", cfg.sample.u_max},
                 {"bisection_tol", cfg.sample.bisection_tol},
                 {"max_bisection_iters", cfg.sample.max_bisection_iters}};
  j["rare_marks"] = cfg.rare_marks;
  j["evaluate"] = {{"max_prefixes", cfg.max_eval_prefixes}, {"calibration_prefixes", cfg.max_calibration_prefixes}};
  j["fidelity"] = {{"grid_points", cfg.fidelity.grid_points},
                   {"mass", cfg.fidelity.mass},
                   {"max_prefixes", cfg.fidelity.max_prefixes}};
  return j.dump(2) + "\n";
}

std::vector<PrefixRef> select_prefixes(const Dataset& ds, std::size_t cap, std::uint64_t seed) {
  std::vector<PrefixRef> all;
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    for (std::size_t k = 0; k < ds.sequences[s].size(); ++k) all.push_back({s, k});
  }
  if (cap > 0 && all.size() > cap) {
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(cap);
    std::sort(all.begin(), all.end());
  }
  return all;
}

namespace {

// Visits the selected prefixes one sequence at a time so each sequence is
// encoded once.
template <typename Fn>
void for_each_prefix(const MaterializedModel& w, const Dataset& ds, std::span<const PrefixRef> prefixes, Fn&& fn) {
  std::size_t i = 0;
  while (i < prefixes.size()) {
    const std::size_t s = prefixes[i].sequence;
    if (s >= ds.sequences.size() || prefixes[i].prefix >= ds.sequences[s].size()) {
      throw std::invalid_argument("prefix reference out of range");
    }
    const auto& seq = ds.sequences[s];
    const auto states = encode_prefixes(seq, w.encoder);
    for (; i < prefixes.size() && prefixes[i].sequence == s; ++i) {
      const std::size_t k = prefixes[i].prefix;
      if (k >= seq.size()) throw std::invalid_argument("prefix reference out of range");
      const ConditionalIntegral ci(w.iem, states[k]);
      fn(prefixes[i], seq, ci);
    }
  }
}

void check_sorted(std::span<const PrefixRef> prefixes) {
  if (!std::is_sorted(prefixes.begin(), prefixes.end())) throw std::invalid_argument("prefixes must be sorted");
}

}  // namespace

CalibrationSet mark_first_scores(const MaterializedModel& w, const Dataset& ds, std::span<const double> prior,
                                 std::span<const PrefixRef> prefixes) {
  check_sorted(prefixes);
  CalibrationSet out;
  for_each_prefix(w, ds, prefixes, [&](const PrefixRef& ref, const EventSequence& seq, const ConditionalIntegral& ci) {
    out.ratios.push_back(ratios(ci.mark_prob(), prior, true));
    out.labels.push_back(seq.events[ref.prefix].mark);
  });
  return out;
}

CalibrationSet time_mark_scores(const MaterializedModel& w, const Dataset& ds, std::span<const double> prior,
                                std::span<const PrefixRef> prefixes, const SampleConfig& sample) {
  check_sorted(prefixes);
  CalibrationSet out;
  for_each_prefix(w, ds, prefixes, [&](const PrefixRef& ref, const EventSequence& seq, const ConditionalIntegral& ci) {
    const double t = predict_time_marginal(ci, sample);
    out.ratios.push_back(ratios(mark_given_time(ci, t), prior, true));
    out.labels.push_back(seq.events[ref.prefix].mark);
  });
  return out;
}

std::vector<PrefixPrediction> predict(const MaterializedModel& w, const NormalizationStats& stats,
                                      const Dataset& test, const ThresholdTable& mark_first,
                                      const ThresholdTable& time_mark, const SampleConfig& sample,
                                      std::span<const PrefixRef> prefixes, PredictOptions options) {
  check_sorted(prefixes);
  sample.validate();
  std::vector<PrefixPrediction> out;
  out.reserve(prefixes.size());
  for_each_prefix(w, test, prefixes, [&](const PrefixRef& ref, const EventSequence& seq, const ConditionalIntegral& ci) {
    PrefixPrediction p;
    p.ref = ref;
    p.true_mark = seq.events[ref.prefix].mark;
    p.true_time = stats.invert(seq.events[ref.prefix].time);
    const auto& pm = ci.mark_prob();
    p.mark_plain = predict_mark_plain(pm);
    p.mark = predict_mark(ratios(pm, mark_first.prior, true), mark_first);
    if (options.times) {
      p.time_true_mark = predict_time(ci, p.true_mark, sample);
      p.time_pred_mark = p.mark == p.true_mark ? p.time_true_mark : predict_time(ci, p.mark, sample);
      p.time_marginal = predict_time_marginal(ci, sample);
      const auto pmt = mark_given_time(ci, p.time_marginal);
      p.tm_mark_plain = predict_mark_plain(pmt);
      p.tm_mark = predict_mark(ratios(pmt, time_mark.prior, true), time_mark);
      p.time_true_mark = stats.invert(p.time_true_mark);
      p.time_pred_mark = stats.invert(p.time_pred_mark);
      p.time_marginal = stats.invert(p.time_marginal);
    } else {
      p.tm_mark = p.mark;
      p.tm_mark_plain = p.mark_plain;
    }
    out.push_back(p);
  });
  return out;
}

std::string predictions_csv(const std::vector<PrefixPrediction>& preds) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "sequence,prefix,true_mark,true_time,mark,mark_plain,time_pred_mark,time_true_mark,time_marginal,"
        "tm_mark,tm_mark_plain\n";
  for (const auto& p : preds) {
    os << p.ref.sequence << ',' << p.ref.prefix << ',' << p.true_mark << ',' << p.true_time << ',' << p.mark << ','
       << p.mark_plain << ',' << p.time_pred_mark << ',' << p.time_true_mark << ',' << p.time_marginal << ','
       << p.tm_mark << ',' << p.tm_mark_plain << '\n';
  }
  return os.str();
}

const std::vector<std::string>& EvaluationReport::methods() {
  static const std::vector<std::string> m = {"ours", "ours-w/o-thresholding", "time-mark-with-thresholding",
                                             "time-mark-w/o-thresholding"};
  return m;
}

const std::vector<std::string>& EvaluationReport::subsets() {
  static const std::vector<std::string> s = {"M", "M_r", "M_f"};
  return s;
}

const MethodScores& EvaluationReport::at(const std::string& method, const std::string& subset) const {
  const auto& ms = methods();
  const auto& ss = subsets();
  const auto mi = std::find(ms.begin(), ms.end(), method);
  const auto si = std::find(ss.begin(), ss.end(), subset);
  if (mi == ms.end() || si == ss.end()) throw std::out_of_range("unknown report cell " + method + "/" + subset);
  return cells.at(static_cast<std::size_t>(mi - ms.begin())).at(static_cast<std::size_t>(si - ss.begin()));
}

std::string EvaluationReport::to_json() const {
  json j;
  json methods_j = json::object();
  for (std::size_t m = 0; m < methods().size(); ++m) {
    json subsets_j = json::object();
    for (std::size_t s = 0; s < subsets().size(); ++s) {
      const auto& c = cells[m][s];
      subsets_j[subsets()[s]] = {
          {"macro_f1", num_or_null(c.macro_f1)}, {"micro_f1", num_or_null(c.micro_f1)}, {"mae", num_or_null(c.mae)}};
    }
    methods_j[methods()[m]] = std::move(subsets_j);
  }
  j["methods"] = std::move(methods_j);
  j["nll"] = num_or_null(nll);
  j["num_prefixes"] = num_prefixes;
  return j.dump(2) + "\n";
}

std::string EvaluationReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "method,subset,macro_f1,micro_f1,mae\n";
  auto cell = [&](double v) {
    if (std::isfinite(v)) os << v;
  };
  for (std::size_t m = 0; m < methods().size(); ++m) {
    for (std::size_t s = 0; s < subsets().size(); ++s) {
      const auto& c = cells[m][s];
      os << methods()[m] << ',' << subsets()[s] << ',';
      cell(c.macro_f1);
      os << ',';
      cell(c.micro_f1);
      os << ',';
      cell(c.mae);
      os << '\n';
    }
  }
  os << "nll,M,,,";
  cell(nll);
  os << '\n';
  return os.str();
}

EvaluationReport evaluate_predictions(const std::vector<PrefixPrediction>& preds, const MarkPartition& partition,
                                      int num_marks, double nll) {
  if (preds.empty()) throw DataError("no predictions to evaluate");
  EvaluationReport r;
  r.nll = nll;
  r.num_prefixes = preds.size();
  std::vector<MarkId> all(static_cast<std::size_t>(num_marks));
  for (int m = 0; m < num_marks; ++m) all[static_cast<std::size_t>(m)] = m;
  const std::vector<const std::vector<MarkId>*> subsets = {&all, &partition.rare, &partition.frequent};

  std::vector<MarkId> labels;
  std::vector<double> truth, t_mark_first, t_marginal;
  std::vector<std::vector<MarkId>> marks(4);
  for (const auto& p : preds) {
    labels.push_back(p.true_mark);
    truth.push_back(p.true_time);
    t_mark_first.push_back(p.time_true_mark);
    t_marginal.push_back(p.time_marginal);
    marks[0].push_back(p.mark);
    marks[1].push_back(p.mark_plain);
    marks[2].push_back(p.tm_mark);
    marks[3].push_back(p.tm_mark_plain);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.cells.assign(4, std::vector<MethodScores>(3));
  for (std::size_t m = 0; m < 4; ++m) {
    const auto& times = m < 2 ? t_mark_first : t_marginal;
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& subset = *subsets[s];
      auto& c = r.cells[m][s];
      if (subset.empty()) {
        c = {nan, nan, nan};
        continue;
      }
      c.macro_f1 = macro_f1(marks[m], labels, subset);
      c.micro_f1 = micro_f1(marks[m], labels, subset);
      c.mae = mae_geometric(times, truth, labels, subset);
    }
  }
  return r;
}

std::string fidelity_to_json(const FidelityReport& r) {
  json j = {{"spearman", num_or_null(r.spearman)},
            {"l1", num_or_null(r.l1)},
            {"relative_nll", num_or_null(r.relative_nll)},
            {"mean_nll_gap", num_or_null(r.mean_nll_gap)},
            {"num_prefixes", r.num_prefixes},
            {"num_events", r.num_events}};
  return j.dump(2) + "\n";
}

std::string fidelity_curves_csv(const std::vector<FidelityCurve>& curves) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "sequence,prefix,t,learned,oracle\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      os << c.sequence << ',' << c.prefix << ',' << c.times[i] << ',' << c.learned[i] << ',' << c.oracle[i] << '\n';
    }
  }
  return os.str();
}

namespace {

Dataset load_split(const std::filesystem::path& path, Split split) {
  if (!std::filesystem::exists(path)) {
    throw DataError("missing " + to_string(split) + " split: " + path.string());
  }
  Dataset ds = load_jsonl(path);
  ds.split = split;
  return ds;
}

int common_vocab(Dataset& a, Dataset& b, Dataset& c) {
  const int v = std::max({a.vocab_size, b.vocab_size, c.vocab_size});
  a.vocab_size = b.vocab_size = c.vocab_size = v;
  return v;
}

Checkpoint load_trained(const ExperimentConfig& cfg) {
  const auto path = cfg.checkpoint_path();
  if (!std::filesystem::exists(path)) throw DataError("missing checkpoint: " + path.string());
  return load_checkpoint(path);
}

Dataset prep_split(const ExperimentConfig& cfg, Split split, int vocab) {
  Dataset ds = load_split(cfg.prep_path(split), split);
  if (ds.vocab_size > vocab) throw DataError(to_string(split) + " split uses marks the model does not know");
  ds.vocab_size = vocab;
  return ds;
}

std::string echo(const ExperimentConfig& cfg) { return config_to_json(cfg); }

}  // namespace

GeneratedSplits cmd_generate(const ExperimentConfig& cfg) {
  const auto spec = cfg.process_spec();
  if (!spec) throw ConfigError("generate needs a process");
  auto splits = generate_splits(*spec, cfg.sizes, cfg.seed);
  save_jsonl(splits.train, cfg.raw_path(Split::kTrain));
  save_jsonl(splits.val, cfg.raw_path(Split::kVal));
  save_jsonl(splits.test, cfg.raw_path(Split::kTest));
  return splits;
}

NormalizationStats cmd_preprocess(const ExperimentConfig& cfg) {
  Dataset train = load_split(cfg.raw_path(Split::kTrain), Split::kTrain);
  Dataset val = load_split(cfg.raw_path(Split::kVal), Split::kVal);
  Dataset test = load_split(cfg.raw_path(Split::kTest), Split::kTest);
  common_vocab(train, val, test);
  NormalizationStats stats = NormalizationStats::identity();
  if (cfg.normalized()) {
    auto [norm_train, s] = normalize_times(train);
    train = std::move(norm_train);
    stats = s;
    val = normalize_times(val, stats).first;
    test = normalize_times(test, stats).first;
  }
  save_jsonl(train, cfg.prep_path(Split::kTrain));
  save_jsonl(val, cfg.prep_path(Split::kVal));
  save_jsonl(test, cfg.prep_path(Split::kTest));
  write_file_atomic(cfg.stats_path(), stats_to_json(stats));
  return stats;
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  Dataset train = load_split(cfg.prep_path(Split::kTrain), Split::kTrain);
  Dataset val = load_split(cfg.prep_path(Split::kVal), Split::kVal);
  const auto stats = stats_from_json(read_file(cfg.stats_path()));
  const int vocab = std::max(train.vocab_size, val.vocab_size);
  train.vocab_size = val.vocab_size = vocab;
  if (cfg.resample == Resampling::kOversample) train = oversample(train, cfg.seed);
  if (cfg.resample == Resampling::kUndersample) train = undersample(train, cfg.seed);
  ModelShape shape = cfg.shape;
  shape.num_marks = vocab;
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainResult result = ifnmtpp::train(train, val, shape, tc);
  Checkpoint ckpt{result.model, stats, echo(cfg)};
  save_checkpoint(ckpt, cfg.checkpoint_path());
  write_file_atomic(cfg.history_path(), history_csv(result.history));
  return result;
}

std::pair<ThresholdTable, ThresholdTable> cmd_calibrate(const ExperimentConfig& cfg) {
  const Checkpoint ckpt = load_trained(cfg);
  const int vocab = ckpt.model.shape().num_marks;
  const Dataset train = prep_split(cfg, Split::kTrain, vocab);
  const auto w = ckpt.model.materialize();
  const auto prior = compute_prior(train);

  const auto all = select_prefixes(train, 0, cfg.seed);
  const auto mf = mark_first_scores(w, train, prior, all);
  const ThresholdTable mark_first = calibrate(mf.ratios, mf.labels, prior);

  SampleConfig sample = cfg.sample;
  sample.seed = cfg.seed;
  const auto subset = select_prefixes(train, cfg.max_calibration_prefixes, cfg.seed);
  const auto tm = time_mark_scores(w, train, prior, subset, sample);
  const ThresholdTable time_mark = calibrate(tm.ratios, tm.labels, prior);

  save_thresholds(mark_first, cfg.thresholds_path().string());
  save_thresholds(time_mark, cfg.time_mark_thresholds_path().string());
  return {mark_first, time_mark};
}

namespace {

struct EvalInputs {
  Checkpoint ckpt;
  Dataset test;
  ThresholdTable mark_first, time_mark;
};

EvalInputs eval_inputs(const ExperimentConfig& cfg) {
  EvalInputs in{load_trained(cfg), {}, {}, {}};
  const int vocab = in.ckpt.model.shape().num_marks;
  in.test = prep_split(cfg, Split::kTest, vocab);
  for (const auto& p : {cfg.thresholds_path(), cfg.time_mark_thresholds_path()}) {
    if (!std::filesystem::exists(p)) throw DataError("missing thresholds: " + p.string());
  }
  in.mark_first = load_thresholds(cfg.thresholds_path().string());
  in.time_mark = load_thresholds(cfg.time_mark_thresholds_path().string());
  if (in.mark_first.num_marks() != vocab || in.time_mark.num_marks() != vocab) {
    throw DataError("threshold tables do not match the model's marks");
  }
  return in;
}

std::vector<PrefixPrediction> run_predict(const ExperimentConfig& cfg, const EvalInputs& in) {
  SampleConfig sample = cfg.sample;
  sample.seed = cfg.seed;
  const auto prefixes = select_prefixes(in.test, cfg.max_eval_prefixes, cfg.seed);
  return predict(in.ckpt.model.materialize(), in.ckpt.stats, in.test, in.mark_first, in.time_mark, sample, prefixes);
}

}  // namespace

std::vector<PrefixPrediction> cmd_predict(const ExperimentConfig& cfg) {
  const EvalInputs in = eval_inputs(cfg);
  auto preds = run_predict(cfg, in);
  write_file_atomic(cfg.out / "predictions.csv", predictions_csv(preds));
  return preds;
}

EvaluationReport cmd_evaluate(const ExperimentConfig& cfg) {
  const EvalInputs in = eval_inputs(cfg);
  const int vocab = in.ckpt.model.shape().num_marks;
  for (auto m : cfg.rare_marks) {
    if (m >= vocab) throw ConfigError("rare mark " + std::to_string(m) + " is outside the vocabulary");
  }
  const auto preds = run_predict(cfg, in);
  const double nll = eval_nll(in.test, in.ckpt.model.materialize());
  const auto report = evaluate_predictions(preds, partition_marks(vocab, cfg.rare_marks), vocab, nll);
  write_file_atomic(cfg.out / "report.json", report.to_json());
  write_file_atomic(cfg.out / "report.csv", report.to_csv());
  return report;
}

FidelityReport cmd_fidelity(const ExperimentConfig& cfg, bool oracle_self_test) {
  const auto spec = cfg.process_spec();
  if (!spec) throw ConfigError("fidelity needs a synthetic process");
  const Dataset test = load_split(cfg.raw_path(Split::kTest), Split::kTest);
  FidelityConfig fc = cfg.fidelity;
  fc.seed = cfg.seed;
  std::vector<FidelityCurve> curves;
  FidelityReport report;
  if (oracle_self_test) {
    report = fidelity(OracleModel(*spec), *spec, test, fc, &curves);
  } else {
    const Checkpoint ckpt = load_trained(cfg);
    report = fidelity(ModelDensity(ckpt.model, ckpt.stats), *spec, test, fc, &curves);
  }
  const std::string stem = oracle_self_test ? "fidelity_oracle" : "fidelity";
  write_file_atomic(cfg.out / (stem + ".json"), fidelity_to_json(report));
  write_file_atomic(cfg.out / (stem + "_curves.csv"), fidelity_curves_csv(curves));
  return report;
}

}  // namespace ifnmtpp
