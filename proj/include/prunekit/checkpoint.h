// include/prunekit/checkpoint.h

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


#ifndef PRUNEKIT_CHECKPOINT_H_
#define PRUNEKIT_CHECKPOINT_H_

#include <string>

#include <nlohmann/json.hpp>

#include "prunekit/nn.h"

namespace prunekit {

inline constexpr int kCheckpointVersion = 1;

/// {version, input_width, layers: [{activation, weights (row-major), biases}]}.
/// A "keep" array is written only for layers with masked neurons.
nlohmann::json NetworkToJson(const Network &net);
Network NetworkFromJson(const nlohmann::json &j);

void SaveNetwork(const Network &net, const std::string &path);
Network LoadNetwork(const std::string &path);

/// Shared helpers for the JSON file formats.
nlohmann::json ReadJsonFile(const std::string &path);
void WriteJsonFile(const nlohmann::json &j, const std::string &path);

}  // namespace prunekit

#endif  // PRUNEKIT_CHECKPOINT_H_
