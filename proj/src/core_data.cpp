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

#include "ifnmtpp/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/io_util.hpp"

namespace ifnmtpp {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnspecified: break;
  }
  return "unspecified";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "unspecified" || name.empty()) return Split::kUnspecified;
  throw DataError("unknown split tag '" + name + "'");
}

std::size_t Dataset::num_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void validate_sequence(const EventSequence& seq, int vocab_size, std::size_t index) {
  const auto where = [&] { return "sequence " + std::to_string(index); };
  if (!std::isfinite(seq.t_start) || !std::isfinite(seq.t_end)) {
    throw DataError(where() + ": non-finite observation window");
  }
  if (seq.t_end < seq.t_start) {
    throw DataError(where() + ": t_end precedes t_start");
  }
  double prev = seq.t_start;
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const Event& e = seq.events[i];
    if (!std::isfinite(e.time)) {
      throw DataError(where() + ": non-finite time at event " + std::to_string(i));
    }
    if (e.mark < 0 || e.mark >= vocab_size) {
      throw DataError(where() + ": mark " + std::to_string(e.mark) + " outside vocabulary of size " +
                      std::to_string(vocab_size));
    }
    if (i == 0 ? e.time < prev : e.time <= prev) {
      throw DataError(where() + ": non-monotone times at event " + std::to_string(i));
    }
    prev = e.time;
  }
  if (prev > seq.t_end) {
    throw DataError(where() + ": event after t_end");
  }
}

void validate_dataset(const Dataset& ds) {
  if (ds.vocab_size <= 0) throw DataError("vocab_size must be positive");
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    validate_sequence(ds.sequences[i], ds.vocab_size, i);
  }
}

namespace {

EventSequence sequence_from_json(const json& j) {
  EventSequence seq;
  for (const auto& e : j.at("events")) {
    seq.events.push_back({e.at("mark").get<MarkId>(), e.at("time").get<double>()});
  }
  seq.t_start = j.at("t_start").get<double>();
  seq.t_end = j.at("t_end").get<double>();
  return seq;
}

json sequence_to_json(const EventSequence& seq) {
  json events = json::array();
  for (const auto& e : seq.events) events.push_back({{"mark", e.mark}, {"time", e.time}});
  return {{"events", std::move(events)}, {"t_start", seq.t_start}, {"t_end", seq.t_end}};
}

}  // namespace

Dataset parse_jsonl(std::istream& in) {
  Dataset ds;
  std::optional<int> declared_vocab;
  std::string line;
  std::size_t line_no = 0;
  int max_mark = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
    }
    if (!j.is_object()) {
      throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");
    }
    if (!j.contains("events")) {
      if (!ds.sequences.empty()) {
        throw DataError("line " + std::to_string(line_no) + ": header must precede sequences");
      }
      try {
        if (j.contains("vocab_size")) declared_vocab = j.at("vocab_size").get<int>();
        if (j.contains("split")) ds.split = split_from_string(j.at("split").get<std::string>());
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": bad header: " + e.what());
      }
      continue;
    }
    try {
      ds.sequences.push_back(sequence_from_json(j));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed sequence: " + e.what());
    }
    for (const auto& e : ds.sequences.back().events) max_mark = std::max(max_mark, e.mark);
  }
  ds.vocab_size = declared_vocab.value_or(max_mark + 1);
  if (ds.vocab_size <= 0) throw DataError("dataset has no marks and no declared vocab_size");
  validate_dataset(ds);
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_jsonl(in);
}

std::string to_jsonl(const Dataset& ds) {
  std::ostringstream out;
  json header = {{"vocab_size", ds.vocab_size}};
  if (ds.split != Split::kUnspecified) header["split"] = to_string(ds.split);
  out << header.dump() << '\n';
  for (const auto& seq : ds.sequences) out << sequence_to_json(seq).dump() << '\n';
  return out.str();
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(ds));
}

std::pair<Dataset, NormalizationStats> normalize_times(const Dataset& ds,
                                                       std::optional<NormalizationStats> stats) {
  if (!stats) {
    const std::size_t n = ds.num_events();
    if (n == 0) throw DataError("cannot compute normalization stats of an empty dataset");
    double mean = 0.0;
    for (const auto& s : ds.sequences)
      for (const auto& e : s.events) mean += e.time;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& s : ds.sequences)
      for (const auto& e : s.events) var += (e.time - mean) * (e.time - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw DataError("degenerate dataset: all event times identical");
    stats = NormalizationStats{mean, sd};
  } else if (!(stats->std > 0.0)) {
    throw DataError("normalization std must be positive");
  }
  Dataset out = ds;
  for (auto& s : out.sequences) {
    for (auto& e : s.events) e.time = stats->apply(e.time);
    s.t_start = stats->apply(s.t_start);
    s.t_end = stats->apply(s.t_end);
  }
  return {std::move(out), *stats};
}

Dataset denormalize_times(const Dataset& ds, const NormalizationStats& stats) {
  Dataset out = ds;
  for (auto& s : out.sequences) {
    for (auto& e : s.events) e.time = stats.invert(e.time);
    s.t_start = stats.invert(s.t_start);
    s.t_end = stats.invert(s.t_end);
  }
  return out;
}

std::vector<std::size_t> mark_counts(const Dataset& ds) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.vocab_size), 0);
  for (const auto& s : ds.sequences)
    for (const auto& e : s.events) ++counts[static_cast<std::size_t>(e.mark)];
  return counts;
}

std::vector<double> compute_prior(const Dataset& ds) {
  const auto counts = mark_counts(ds);
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) throw DataError("cannot compute mark prior of an empty dataset");
  std::vector<double> prior(counts.size());
  for (std::size_t m = 0; m < counts.size(); ++m) {
    prior[m] = static_cast<double>(counts[m]) / static_cast<double>(total);
  }
  return prior;
}

MarkPartition partition_marks(int vocab_size, std::span<const MarkId> rare) {
  std::vector<bool> is_rare(static_cast<std::size_t>(vocab_size), false);
  for (MarkId m : rare) {
    if (m < 0 || m >= vocab_size) {
      throw ConfigError("rare mark " + std::to_string(m) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
    }
    is_rare[static_cast<std::size_t>(m)] = true;
  }
  MarkPartition p;
  for (MarkId m = 0; m < vocab_size; ++m) {
    (is_rare[static_cast<std::size_t>(m)] ? p.rare : p.frequent).push_back(m);
  }
  return p;
}

namespace {

std::vector<std::size_t> counts_of(const EventSequence& seq, int vocab) {
  std::vector<std::size_t> c(static_cast<std::size_t>(vocab), 0);
  for (const auto& e : seq.events) ++c[static_cast<std::size_t>(e.mark)];
  return c;
}

}  // namespace

Dataset oversample(const Dataset& ds, std::uint64_t seed) {
  if (ds.sequences.empty()) throw DataError("cannot resample an empty dataset");
  auto counts = mark_counts(ds);
  const std::size_t target = *std::max_element(counts.begin(), counts.end());
  std::mt19937_64 rng(seed);
  Dataset out = ds;

  // Rarest marks first; duplicates also raise counts of co-occurring marks.
  std::vector<MarkId> order;
  for (MarkId m = 0; m < ds.vocab_size; ++m) {
    if (counts[static_cast<std::size_t>(m)] > 0) order.push_back(m);
  }
  std::stable_sort(order.begin(), order.end(), [&](MarkId a, MarkId b) {
    return counts[static_cast<std::size_t>(a)] < counts[static_cast<std::size_t>(b)];
  });
  for (MarkId m : order) {
    std::vector<std::size_t> holders;
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
      const auto& ev = ds.sequences[i].events;
      if (std::any_of(ev.begin(), ev.end(), [m](const Event& e) { return e.mark == m; })) {
        holders.push_back(i);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, holders.size() - 1);
    while (counts[static_cast<std::size_t>(m)] < target) {
      const auto& seq = ds.sequences[holders[pick(rng)]];
      out.sequences.push_back(seq);
      const auto c = counts_of(seq, ds.vocab_size);
      for (std::size_t k = 0; k < c.size(); ++k) counts[k] += c[k];
    }
  }
  return out;
}

Dataset undersample(const Dataset& ds, std::uint64_t seed) {
  if (ds.sequences.empty()) throw DataError("cannot resample an empty dataset");
  const auto counts = mark_counts(ds);
  std::size_t target = 0;
  bool balanced = true;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    if (target != 0 && c != target) balanced = false;
    target = target == 0 ? c : std::min(target, c);
  }
  if (balanced) return ds;

  std::vector<std::size_t> order(ds.sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> kept_counts(counts.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const auto c = counts_of(ds.sequences[i], ds.vocab_size);
    bool fits = true;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] > 0 && kept_counts[k] >= target) fits = false;
    }
    if (!fits) continue;
    kept.push_back(i);
    for (std::size_t k = 0; k < c.size(); ++k) kept_counts[k] += c[k];
  }
  std::sort(kept.begin(), kept.end());
  Dataset out;
  out.vocab_size = ds.vocab_size;
  out.split = ds.split;
  for (std::size_t i : kept) out.sequences.push_back(ds.sequences[i]);
  return out;
}

}  // namespace ifnmtpp
