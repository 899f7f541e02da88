// Copyright 2026 The Super Token Transformer Authors.
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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stt {

// Incompatible tensor extents (shape mismatch, bad rank, bad geometry).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A hyperparameter or model configuration that cannot be applied.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable input data. `offset` is the byte position where
// decoding failed, or -1 when not applicable.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(what), offset_(offset) {}
  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::int64_t offset_;
};

// A NaN or Inf escaped an operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace stt
