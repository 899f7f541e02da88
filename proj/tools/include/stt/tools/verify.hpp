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

// Self-verification suites: sparse vs dense attention, gradients against
// finite differences, and structural invariants of the association maps and
// the complexity accountant.

#pragma once

#include <string>
#include <vector>

namespace stt {

struct CheckResult {
  std::string id;        // dotted, e.g. "oracle.f64.masked.p2.h4.c8"
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;   // measured <= tolerance unless noted in `detail`
  std::string detail;
};

// Square geometries p = q, h = w over {1, 2, 3} x {1, 2, 4} x C in {1, 4, 8},
// both phantom modes, f32 and f64.
std::vector<CheckResult> oracle_suite();
// Degenerate 1x1-grid attention against plain global attention.
std::vector<CheckResult> global_suite();
std::vector<CheckResult> gradcheck_suite();
std::vector<CheckResult> association_suite();
std::vector<CheckResult> flops_suite();

inline constexpr const char* kSuiteNames = "oracle | gradcheck | invariants | all";
// "oracle" runs oracle + global, "invariants" association + flops. Results
// are sorted by id. Throws UsageError for an unknown suite.
std::vector<CheckResult> run_suite(const std::string& name);

std::string format_check(const CheckResult& r);

}  // namespace stt
