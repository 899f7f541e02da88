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
#include <random>

#include "stt/tensor.hpp"

namespace stt {

// Seeded generator. Streams are reproducible on one platform; the standard
// distributions are implementation-defined across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, index), e.g. one per dataset sample.
  static Rng derive(std::uint64_t seed, std::uint64_t index);

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Normal resampled until it lands within two standard deviations.
  double truncated_normal(double stddev);
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

  template <typename T>
  BasicTensor<T> normal_tensor(const Shape& shape, double stddev = 1.0) {
    std::vector<T> v(static_cast<std::size_t>(shape.numel()));
    for (auto& x : v) x = static_cast<T>(normal(0.0, stddev));
    return BasicTensor<T>(shape, std::move(v));
  }
  template <typename T>
  BasicTensor<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    std::vector<T> v(static_cast<std::size_t>(shape.numel()));
    for (auto& x : v) x = static_cast<T>(uniform(lo, hi));
    return BasicTensor<T>(shape, std::move(v));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stt
