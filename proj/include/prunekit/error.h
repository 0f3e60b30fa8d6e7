// include/prunekit/error.h

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

#ifndef PRUNEKIT_ERROR_H_
#define PRUNEKIT_ERROR_H_

#include <stdexcept>
#include <string>

namespace prunekit {

/// Raised when a caller hands over data that violates an operation's
/// preconditions (shape mismatch, empty corpus, out-of-range layer, ...).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string &what) : std::invalid_argument(what) {}
};

/// Raised when training produces a non-finite loss or parameter.
class Divergence : public std::runtime_error {
 public:
  explicit Divergence(const std::string &what) : std::runtime_error(what) {}
};

}  // namespace prunekit

#endif  // PRUNEKIT_ERROR_H_
