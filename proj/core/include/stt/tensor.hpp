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

// Dense row-major tensors with a reverse-mode tape.
//
// A BasicTensor is a cheap shared handle to a graph node. Every operation in
// ops.hpp returns a new node; when at least one input requires a gradient and
// grad mode is enabled, the node records its inputs and a backward rule. The
// recorded graph is the tape: backward() replays it in reverse topological
// order and accumulates gradients into every requires_grad leaf.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stt/error.hpp"

namespace stt {

class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims);
  explicit Shape(std::vector<std::int64_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::int64_t operator[](std::size_t i) const { return dims_.at(i); }
  std::int64_t back() const { return dims_.at(dims_.size() - 1); }
  std::int64_t numel() const noexcept;
  const std::vector<std::int64_t>& dims() const noexcept { return dims_; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  void validate() const;
  std::vector<std::int64_t> dims_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(std::span<const T>)> backward_fn;

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad;
  }
};

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(const Shape& shape);
  static BasicTensor full(const Shape& shape, T value);
  static BasicTensor scalar(T value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::int64_t dim(std::size_t i) const { return shape()[i]; }
  std::size_t rank() const { return shape().rank(); }
  std::int64_t numel() const { return shape().numel(); }

  std::span<const T> data() const { return node().value; }
  // Direct write access, for initialization and optimizer updates. Writing
  // into a tensor that already feeds a recorded graph invalidates it.
  std::span<T> mutable_data() { return node().value; }
  T item() const;

  bool requires_grad() const { return node().requires_grad; }
  BasicTensor& set_requires_grad(bool on);
  bool has_grad() const { return !node().grad.empty(); }
  // Accumulated gradient; all zeros when nothing has been accumulated.
  std::vector<T> grad() const;
  BasicTensor grad_tensor() const;
  void zero_grad() { node().grad.clear(); }
  // Gradient accumulator of the shared node, used by backward rules.
  std::span<T> grad_buffer() const { return node().grad_buffer(); }

  const char* op() const { return node().op; }

  // Same values, fresh leaf without history.
  BasicTensor detach() const;
  BasicTensor clone() const { return detach(); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data().begin(), data().end());
    return BasicTensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

 private:
  detail::Node<T>& node() const;
  std::shared_ptr<detail::Node<T>> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

// Counts multiply-accumulates executed by matmul, convolutions and pooling on
// this thread while the scope is alive. Scopes do not nest.
class MacCountScope {
 public:
  MacCountScope();
  ~MacCountScope();
  MacCountScope(const MacCountScope&) = delete;
  MacCountScope& operator=(const MacCountScope&) = delete;
  std::uint64_t count() const;
};

namespace detail {
void add_macs(std::uint64_t n) noexcept;
}  // namespace detail

// Builds the result node of an operation. `backward` receives the output
// gradient and must accumulate into the grad buffers of the inputs that
// require gradients; it is dropped when no input does. Throws NumericError
// when `value` holds a NaN or Inf.
template <typename T>
BasicTensor<T> record_op(const char* op, Shape shape, std::vector<T> value,
                         std::initializer_list<BasicTensor<T>> inputs,
                         std::function<void(std::span<const T>)> backward);

// Reverse sweep from a scalar loss. The interior of the graph is released
// afterwards; leaf gradients accumulate across calls until zero_grad().
template <typename T>
void backward(const BasicTensor<T>& loss);

}  // namespace stt
