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

#include "ifnmtpp/checkpoint.hpp"

#include <cmath>

#include "ifnmtpp/error.hpp"
#include "ifnmtpp/io_util.hpp"
#include "json.hpp"

namespace ifnmtpp {

using nlohmann::json;

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& shape = ckpt.model.shape();
  json j;
  j["format"] = "ifnmtpp-checkpoint";
  j["version"] = kCheckpointVersion;
  j["shape"] = {{"num_marks", shape.num_marks},
                {"history_dim", shape.history_dim},
                {"input_dim", shape.input_dim},
                {"num_layers", shape.num_layers},
                {"embedding_dim", shape.resolved_embedding_dim()}};
  j["epsilon"] = ckpt.model.epsilon();
  j["stats"] = {{"mean", ckpt.stats.mean}, {"std", ckpt.stats.std}};
  j["config"] = json::parse(ckpt.config_json);
  json params = json::object();
  for (const auto& b : ckpt.model.layout()) {
    const auto v = ckpt.model.parameters().segment(b.offset, b.size());
    json entry;
    entry["rows"] = b.rows;
    entry["cols"] = b.cols;
    entry["softplus"] = b.nonnegative;
    entry["data"] = std::vector<double>(v.data(), v.data() + v.size());
    params[b.name] = std::move(entry);
  }
  j["parameters"] = std::move(params);
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "ifnmtpp-checkpoint") throw DataError("not a checkpoint file");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelShape shape;
    const auto& s = j.at("shape");
    shape.num_marks = s.at("num_marks").get<int>();
    shape.history_dim = s.at("history_dim").get<int>();
    shape.input_dim = s.at("input_dim").get<int>();
    shape.num_layers = s.at("num_layers").get<int>();
    shape.embedding_dim = s.at("embedding_dim").get<int>();
    shape.validate();

    Checkpoint ckpt{IfnmtppModel(shape, j.at("epsilon").get<double>()), {}, j.at("config").dump()};
    ckpt.stats.mean = j.at("stats").at("mean").get<double>();
    ckpt.stats.std = j.at("stats").at("std").get<double>();
    if (!(ckpt.stats.std > 0.0) || !std::isfinite(ckpt.stats.mean)) throw DataError("invalid normalization stats");
    const auto& params = j.at("parameters");
    if (params.size() != ckpt.model.layout().size()) throw DataError("checkpoint parameter set does not match shape");
    for (const auto& b : ckpt.model.layout()) {
      const auto& entry = params.at(b.name);
      if (entry.at("rows").get<Eigen::Index>() != b.rows || entry.at("cols").get<Eigen::Index>() != b.cols) {
        throw DataError("parameter '" + b.name + "' has the wrong shape");
      }
      const auto data = entry.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != b.size()) {
        throw DataError("parameter '" + b.name + "' has the wrong length");
      }
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (!std::isfinite(data[static_cast<std::size_t>(i)])) throw DataError("parameter '" + b.name + "' is not finite");
        ckpt.model.parameters()(b.offset + i) = data[static_cast<std::size_t>(i)];
      }
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_file(path)); }

std::string stats_to_json(const NormalizationStats& stats) {
  return json{{"mean", stats.mean}, {"std", stats.std}}.dump(2) + "\n";
}

NormalizationStats stats_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    NormalizationStats s{j.at("mean").get<double>(), j.at("std").get<double>()};
    if (!(s.std > 0.0) || !std::isfinite(s.mean) || !std::isfinite(s.std)) throw DataError("invalid normalization stats");
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed stats file: ") + e.what());
  }
}

}  // namespace ifnmtpp
