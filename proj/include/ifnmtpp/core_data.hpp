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

// Event-stream data model: sequences, JSONL persistence, time normalization,
// mark priors, rare/frequent partitions and sequence-level resampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ifnmtpp {

using MarkId = int;

struct Event {
  MarkId mark = 0;
  double time = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Ordered events observed on the window [t_start, t_end].
struct EventSequence {
  std::vector<Event> events;
  double t_start = 0.0;
  double t_end = 0.0;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  /// Time of the most recent event among the first `prefix` events.
  double last_time(std::size_t prefix) const {
    return prefix == 0 ? t_start : events[prefix - 1].time;
  }

  friend bool operator==(const EventSequence&, const EventSequence&) = default;
};

enum class Split { kUnspecified, kTrain, kVal, kTest };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct Dataset {
  std::vector<EventSequence> sequences;
  int vocab_size = 0;
  Split split = Split::kUnspecified;

  std::size_t num_events() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Affine time scaling t -> (t - mean) / std.
struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;

  double apply(double t) const { return (t - mean) / std; }
  double invert(double t) const { return t * std + mean; }
  /// Maps a duration (difference of times) back to original units.
  double invert_duration(double dt) const { return dt * std; }

  static NormalizationStats identity() { return {0.0, 1.0}; }
  bool is_identity() const { return mean == 0.0 && std == 1.0; }

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

struct MarkPartition {
  std::vector<MarkId> rare;
  std::vector<MarkId> frequent;
};

/// Throws DataError when times are not strictly increasing, fall outside the
/// observation window, are non-finite, or a mark is outside [0, vocab_size).
void validate_sequence(const EventSequence& seq, int vocab_size, std::size_t index);
void validate_dataset(const Dataset& ds);

/// Parses the JSONL format: an optional header object {"vocab_size": k,
/// "split": "..."} followed by one {"events": [...], "t_start", "t_end"}
/// object per line.
Dataset parse_jsonl(std::istream& in);
Dataset load_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const Dataset& ds);
/// Writes via a temporary file and rename.
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

/// Computes stats from `ds` when `stats` is empty, then rescales every event
/// time and the observation window.
std::pair<Dataset, NormalizationStats> normalize_times(
    const Dataset& ds, std::optional<NormalizationStats> stats = std::nullopt);
Dataset denormalize_times(const Dataset& ds, const NormalizationStats& stats);

std::vector<std::size_t> mark_counts(const Dataset& ds);
/// Proportion of each mark among all events; zero-count marks get 0.
std::vector<double> compute_prior(const Dataset& ds);

MarkPartition partition_marks(int vocab_size, std::span<const MarkId> rare);

/// Duplicates whole sequences containing under-represented marks until every
/// present mark reaches the largest per-mark event count.
Dataset oversample(const Dataset& ds, std::uint64_t seed);
/// Keeps a seeded subset of whole sequences so per-mark event counts fall to
/// the smallest non-zero per-mark count.
Dataset undersample(const Dataset& ds, std::uint64_t seed);

}  // namespace ifnmtpp
