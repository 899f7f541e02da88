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

// Analytic complexity and parameter accounting.
//
// Every count here is in multiply-accumulates (MACs): an n x k by k x m
// product costs n*k*m. This is the convention behind the published model
// sizes and is half of a naive "two operations per MAC" count. Softmax,
// normalization, activations and elementwise additions are not modeled.
//
// Symbols: N tokens, C channels, m super tokens, n_iter STS iterations.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stt/blocks.hpp"

namespace stt {

using Count = std::int64_t;

// Dense super-token sampling: 2 * n_iter * m * N * C.
Count flops_sts_dense(Count n, Count c, Count m, Count n_iter);
// Sparse super-token sampling, one iteration: NC (pooling) + 9NC
// (association) + 9NC (update).
Count flops_sts_sparse(Count n, Count c);
// Global multi-head self-attention: 2N^2C + 4NC^2.
Count flops_gsa(Count n, Count c);
// Super token attention with one STS iteration: 2m^2C + 4mC^2 + 28NC
// (STS 19NC, attention over m tokens, upsampling 9NC).
Count flops_sta(Count n, Count c, Count m);
// STA as executed for any iteration count: the pooled association is
// computed once when n_iter = 0, and each iteration adds an association and
// an update otherwise.
Count flops_sta_iterated(Count n, Count c, Count m, int n_iter);

struct FlopsComponent {
  std::string name;     // e.g. "stem", "stage1.sta", "merge2", "head"
  Count params = 0;     // trainable elements
  Count buffers = 0;    // BN running statistics
  Count macs = 0;
  std::string formula;  // how macs were obtained
};

struct FlopsReport {
  std::string arch;
  int resolution = 0;
  std::vector<FlopsComponent> components;

  Count total_params() const;
  Count total_buffers() const;
  Count total_macs() const;
  // Aligned UTF-8 table with totals and the unmodeled-cost note.
  std::string table() const;
  // "component,params,macs,formula" header plus one row per component and
  // a final "total" row.
  std::string csv() const;
};

inline constexpr char kUnmodeledNote[] =
    "not counted: softmax, layer/batch normalization, GELU/swish, residual additions";

// Per-image counts for the architecture at `resolution` (overrides
// cfg.resolution). Throws ConfigError for invalid geometry.
FlopsReport count_model(const ArchConfig& cfg, int resolution);

}  // namespace stt
