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

// Central-difference gradient oracle.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

inline constexpr double kFiniteDifferenceStep = 1e-5;

// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate i.
TensorD finite_difference(const std::function<double(const TensorD&)>& f, const TensorD& x,
                          double h = kFiniteDifferenceStep);

// ||a - b||_2 / max(||a||_2, ||b||_2), and 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::vector<double> per_input;  // one entry per checked tensor
};

// Checks d(loss)/d(inputs[i]) from the tape against finite differences.
// `loss` builds the scalar from the inputs; it is re-evaluated with each
// perturbed coordinate, so it must be deterministic.
GradCheckResult check_gradients(const std::function<TensorD(std::span<const TensorD>)>& loss,
                                std::vector<TensorD> inputs, double h = kFiniteDifferenceStep);

}  // namespace stt
