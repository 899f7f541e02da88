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

// Differentiable operation set. All operations are pure: they never modify
// their inputs (batch_norm in training mode updates the running statistics it
// is handed, which are buffers, not graph values).

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

// Elementwise arithmetic with right-aligned broadcasting over extents of 1.
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s);
template <typename T> BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s);

// [..., n, k] x [..., k, m] -> [..., n, m]. Leading dims must match exactly,
// or one side must be a plain matrix that is broadcast over the other's batch.
template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T> BasicTensor<T> transpose_last2(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> permute(const BasicTensor<T>& x, std::span<const int> order);
template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape);

template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);
// Sum over one axis; the axis is removed from the result.
template <typename T> BasicTensor<T> sum_dim(const BasicTensor<T>& x, int axis);

// Max-subtracted softmax over the last axis. `keep`, when non-empty, has one
// byte per element; entries with keep == 0 are excluded and receive exactly 0.
template <typename T>
BasicTensor<T> softmax_lastdim(const BasicTensor<T>& x, std::span<const std::uint8_t> keep = {});

// [b, c, H, W] -> [b, c, p, q], mean over each (H/p) x (W/q) block. Requires
// exact divisibility.
template <typename T> BasicTensor<T> adaptive_avg_pool(const BasicTensor<T>& x, std::int64_t p, std::int64_t q);
// [b, c, H, W] -> [b, c]
template <typename T> BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

// [b, c, p, q] -> [b, c*9, p*q]: zero-padded 3x3 neighbourhoods. Row index is
// channel * 9 + window cell (row-major), column index is the centre position.
template <typename T> BasicTensor<T> unfold3x3(const BasicTensor<T>& x);
// Adjoint of unfold3x3: [b, c*9, p*q] -> [b, c, p, q].
template <typename T> BasicTensor<T> fold3x3(const BasicTensor<T>& x, std::int64_t p, std::int64_t q);

// Cross-correlation. kernel is [cout, cin, kh, kw]; bias is optional ([cout]).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                      const std::type_identity_t<BasicTensor<T>>* bias, int stride, int pad);
// Per-channel 3x3, stride 1, pad 1. kernel is [c, 1, 3, 3].
template <typename T>
BasicTensor<T> depthwise_conv3x3(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                                 const std::type_identity_t<BasicTensor<T>>* bias = nullptr);

inline constexpr double kNormEps = 1e-5;

// Normalizes each token over the channel axis (axis 1) of [b, c, ...].
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          double eps = kNormEps);

template <typename T>
struct BatchNormStats {
  BasicTensor<T> running_mean;  // [c]
  BasicTensor<T> running_var;   // [c], unbiased
  static BatchNormStats init(std::int64_t channels);
};

// Normalizes each channel over batch and spatial axes. In training mode the
// batch statistics are used and `stats` is updated with `momentum`; otherwise
// the running statistics are used.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          BatchNormStats<T>& stats, bool training, double momentum = 0.1,
                          double eps = kNormEps);

enum class Activation { kGelu, kSwish };

template <typename T> BasicTensor<T> activation(const BasicTensor<T>& x, Activation kind);
template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x) { return activation(x, Activation::kGelu); }
template <typename T> BasicTensor<T> swish(const BasicTensor<T>& x) { return activation(x, Activation::kSwish); }

// Scalar GELU (tanh approximation) and swish, shared with tests.
double gelu_value(double x);
double swish_value(double x);

// [b, c, p*h, q*w] -> [b, p*q, h*w, c]: tokens grouped by grid cell.
template <typename T> BasicTensor<T> grid_partition(const BasicTensor<T>& x, std::int64_t h, std::int64_t w);
// Inverse of grid_partition.
template <typename T>
BasicTensor<T> grid_merge(const BasicTensor<T>& x, std::int64_t p, std::int64_t q, std::int64_t h, std::int64_t w);

}  // namespace stt
