// src/checkpoint.cc

// Copyright 2026 The prunekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "prunekit/checkpoint.h"

#include <fstream>

#include "prunekit/error.h"

namespace prunekit {

using nlohmann::json;

json NetworkToJson(const Network &net) {
  json layers = json::array();
  for (const DenseLayer &l : net.layers()) {
    json weights = json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) weights.push_back(l.weights(r, c));
    json jl = {{"activation", ToString(l.activation)},
               {"out_width", l.out_width()},
               {"weights", std::move(weights)},
               {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}};
    if (!l.fully_kept()) jl["keep"] = l.keep;
    layers.push_back(std::move(jl));
  }
  return {{"version", kCheckpointVersion}, {"input_width", net.input_width()},
          {"layers", std::move(layers)}};
}

Network NetworkFromJson(const json &j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw InvalidInput("unsupported checkpoint version " + j.at("version").dump());
    const auto input_width = j.at("input_width").get<std::size_t>();
    std::vector<DenseLayer> layers;
    std::size_t in = input_width;
    for (const json &jl : j.at("layers")) {
      DenseLayer l;
      l.activation = ActivationFromString(jl.at("activation").get<std::string>());
      const auto biases = jl.at("biases").get<std::vector<double>>();
      const auto weights = jl.at("weights").get<std::vector<double>>();
      const std::size_t out = biases.size();
      if (weights.size() != out * in)
        throw InvalidInput("checkpoint layer " + std::to_string(layers.size()) +
                           " has " + std::to_string(weights.size()) + " weights, expected " +
                           std::to_string(out * in));
      l.biases = Eigen::Map<const Eigen::VectorXd>(biases.data(), static_cast<Eigen::Index>(out));
      l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(
          weights.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
      if (jl.contains("keep")) l.keep = jl.at("keep").get<std::vector<bool>>();
      layers.push_back(std::move(l));
      in = out;
    }
    return Network(input_width, std::move(layers));
  } catch (const json::exception &e) {
    throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
  }
}

json ReadJsonFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

void WriteJsonFile(const json &j, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << j.dump() << '\n';
}

void SaveNetwork(const Network &net, const std::string &path) {
  WriteJsonFile(NetworkToJson(net), path);
}

Network LoadNetwork(const std::string &path) { return NetworkFromJson(ReadJsonFile(path)); }

}  // namespace prunekit
