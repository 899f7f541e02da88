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

// Dense reference for super token attention.
//
// Materializes the [N x m] association, the [m x N] aggregation that produced
// the super tokens, and the [m x m] attention, using plain loops in double
// precision and none of the tensor operations. Only for small instances.

#pragma once

#include <cstdint>
#include <type_traits>
#include <vector>

#include "stt/sta.hpp"

namespace stt {

inline constexpr std::int64_t kOracleMaxEntries = 1'000'000;

struct DenseSta {
  std::int64_t batch = 0, channels = 0, n = 0, m = 0, heads = 0;
  std::vector<double> output;       // [b, C, H, W]
  std::vector<double> association;  // [b, N, m], phantom mass dropped
  std::vector<double> aggregation;  // [b, m, N]: super tokens = aggregation * X
  std::vector<double> attention;    // [b, heads, m, m]
  std::vector<double> effective;    // [b, heads, N, N] = Q A R

  double effective_at(std::int64_t bi, std::int64_t head, std::int64_t i, std::int64_t j) const {
    return effective[static_cast<std::size_t>(((bi * heads + head) * n + i) * n + j)];
  }
};

// `logit_bias` [heads, m, m] is added to the scaled attention logits, as in
// sta_forward. Throws ConfigError when N*m exceeds kOracleMaxEntries.
template <typename T>
DenseSta sta_dense_oracle(const BasicTensor<T>& x, const StaConfig& cfg, const StaWeights<T>& w,
                          const std::type_identity_t<BasicTensor<T>>* logit_bias = nullptr);

}  // namespace stt
