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

#include "stt/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace stt {

Shape::Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() const {
  if (dims_.size() > kMaxRank) {
    throw DimensionError("rank " + std::to_string(dims_.size()) + " exceeds the maximum of 4");
  }
  for (auto d : dims_) {
    if (d < 0) throw DimensionError("negative extent in shape " + str());
  }
}

std::int64_t Shape::numel() const noexcept {
  std::int64_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ", ";
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_mac_active = false;
thread_local std::uint64_t g_macs = 0;

}  // namespace

bool grad_mode_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

MacCountScope::MacCountScope() {
  g_mac_active = true;
  g_macs = 0;
}
MacCountScope::~MacCountScope() { g_mac_active = false; }
std::uint64_t MacCountScope::count() const { return g_macs; }

namespace detail {
void add_macs(std::uint64_t n) noexcept {
  if (g_mac_active) g_macs += n;
}
}  // namespace detail

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (static_cast<std::int64_t>(data.size()) != shape.numel()) {
    throw DimensionError("buffer of " + std::to_string(data.size()) +
                         " elements does not match shape " + shape.str());
  }
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(const Shape& shape) {
  return BasicTensor(shape, std::vector<T>(static_cast<std::size_t>(shape.numel()), T{0}));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value) {
  return BasicTensor(shape, std::vector<T>(static_cast<std::size_t>(shape.numel()), value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return BasicTensor(Shape{}, std::vector<T>{value});
}

template <typename T>
detail::Node<T>& BasicTensor<T>::node() const {
  if (!node_) throw UsageError("use of an undefined tensor");
  return *node_;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape().str());
  return data()[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  node().requires_grad = on;
  return *this;
}

template <typename T>
std::vector<T> BasicTensor<T>::grad() const {
  const auto& n = node();
  if (n.grad.empty()) return std::vector<T>(n.value.size(), T{0});
  return n.grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::grad_tensor() const {
  return BasicTensor(shape(), grad());
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), node().value);
}

template <typename T>
BasicTensor<T> record_op(const char* op, Shape shape, std::vector<T> value,
                         std::initializer_list<BasicTensor<T>> inputs,
                         std::function<void(std::span<const T>)> backward) {
  for (const T v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  BasicTensor<T> out(std::move(shape), std::move(value));
  if (!grad_mode_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node_ptr();
  node.requires_grad = true;
  node.op = op;
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.node_ptr());
  node.backward_fn = std::move(backward);
  return out;
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  using NodePtr = std::shared_ptr<detail::Node<T>>;
  // Owning references: releasing a node's closure may drop the last handle to
  // one of its inputs, which is still pending in the sweep.
  std::vector<NodePtr> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(loss.node_ptr(), 0);
  seen.insert(loss.node_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const NodePtr& child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  loss.node_ptr()->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = it->get();
    if (!node->backward_fn) continue;
    if (!node->grad.empty()) node->backward_fn(node->grad);
    node->backward_fn = nullptr;
    node->inputs.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

template BasicTensor<float> record_op(const char*, Shape, std::vector<float>,
                                      std::initializer_list<BasicTensor<float>>,
                                      std::function<void(std::span<const float>)>);
template BasicTensor<double> record_op(const char*, Shape, std::vector<double>,
                                       std::initializer_list<BasicTensor<double>>,
                                       std::function<void(std::span<const double>)>);
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);

}  // namespace stt
