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

#include "stt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace stt {

TensorD finite_difference(const std::function<double(const TensorD&)>& f, const TensorD& x, double h) {
  TensorD probe = x.detach();
  std::vector<double> grad(static_cast<std::size_t>(x.numel()));
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = f(probe);
    values[i] = orig - h;
    const double down = f(probe);
    values[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return TensorD(x.shape(), std::move(grad));
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

GradCheckResult check_gradients(const std::function<TensorD(std::span<const TensorD>)>& loss,
                                std::vector<TensorD> inputs, double h) {
  for (auto& in : inputs) {
    in = in.detach();
    in.set_requires_grad(true);
  }
  backward(loss(inputs));

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::vector<double> analytic = inputs[k].grad();
    auto f = [&](const TensorD& probe) {
      NoGradGuard guard;
      std::vector<TensorD> args = inputs;
      args[k] = probe;
      return loss(args).item();
    };
    const TensorD numeric = finite_difference(f, inputs[k], h);
    const double err = relative_error(analytic, numeric.data());
    result.per_input.push_back(err);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

}  // namespace stt
