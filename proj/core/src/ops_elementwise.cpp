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

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "stt/ops.hpp"

namespace stt {
namespace {

using Index = std::int64_t;

struct Broadcast {
  Shape shape;
  std::array<Index, 4> extent{1, 1, 1, 1};
  std::array<Index, 4> stride_a{0, 0, 0, 0};
  std::array<Index, 4> stride_b{0, 0, 0, 0};
  bool same = false;
};

std::array<Index, 4> pad4(const Shape& s) {
  std::array<Index, 4> out{1, 1, 1, 1};
  const std::size_t off = 4 - s.rank();
  for (std::size_t i = 0; i < s.rank(); ++i) out[off + i] = s[i];
  return out;
}

std::array<Index, 4> strides4(const std::array<Index, 4>& d) {
  std::array<Index, 4> s{};
  Index acc = 1;
  for (int i = 3; i >= 0; --i) {
    s[i] = acc;
    acc *= d[i];
  }
  return s;
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.shape = a;
    bc.same = true;
    return bc;
  }
  const auto da = pad4(a);
  const auto db = pad4(b);
  const auto sa = strides4(da);
  const auto sb = strides4(db);
  const std::size_t rank = std::max(a.rank(), b.rank());
  std::vector<Index> out;
  for (int i = 0; i < 4; ++i) {
    Index e;
    if (da[i] == db[i]) {
      e = da[i];
    } else if (da[i] == 1) {
      e = db[i];
    } else if (db[i] == 1) {
      e = da[i];
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str());
    }
    bc.extent[i] = e;
    bc.stride_a[i] = (da[i] == 1) ? 0 : sa[i];
    bc.stride_b[i] = (db[i] == 1) ? 0 : sb[i];
    if (static_cast<std::size_t>(i) >= 4 - rank) out.push_back(e);
  }
  bc.shape = Shape(out);
  return bc;
}

template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& fn) {
  Index o = 0;
  for (Index i0 = 0; i0 < bc.extent[0]; ++i0) {
    for (Index i1 = 0; i1 < bc.extent[1]; ++i1) {
      for (Index i2 = 0; i2 < bc.extent[2]; ++i2) {
        const Index ba = i0 * bc.stride_a[0] + i1 * bc.stride_a[1] + i2 * bc.stride_a[2];
        const Index bb = i0 * bc.stride_b[0] + i1 * bc.stride_b[1] + i2 * bc.stride_b[2];
        for (Index i3 = 0; i3 < bc.extent[3]; ++i3) {
          fn(o++, ba + i3 * bc.stride_a[3], bb + i3 * bc.stride_b[3]);
        }
      }
    }
  }
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <typename T>
BasicTensor<T> binary(const BasicTensor<T>& a, const BasicTensor<T>& b, BinOp op, const char* name) {
  const Broadcast bc = broadcast(a.shape(), b.shape(), name);
  std::vector<T> out(static_cast<std::size_t>(bc.shape.numel()));
  const auto av = a.data();
  const auto bv = b.data();
  auto apply = [op](T x, T y) -> T {
    switch (op) {
      case BinOp::kAdd: return x + y;
      case BinOp::kSub: return x - y;
      case BinOp::kMul: return x * y;
      case BinOp::kDiv: return x / y;
    }
    return T{0};
  };
  if (bc.same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(av[i], bv[i]);
  } else {
    for_each_broadcast(bc, [&](Index o, Index ia, Index ib) { out[o] = apply(av[ia], bv[ib]); });
  }
  return record_op<T>(name, bc.shape, std::move(out), {a, b},
                      [a, b, bc, op](std::span<const T> g) mutable {
                        const auto av = a.data();
                        const auto bv = b.data();
                        std::span<T> ga = a.requires_grad() ? a.grad_buffer() : std::span<T>{};
                        std::span<T> gb = b.requires_grad() ? b.grad_buffer() : std::span<T>{};
                        auto step = [&](Index o, Index ia, Index ib) {
                          const T go = g[o];
                          switch (op) {
                            case BinOp::kAdd:
                              if (!ga.empty()) ga[ia] += go;
                              if (!gb.empty()) gb[ib] += go;
                              break;
                            case BinOp::kSub:
                              if (!ga.empty()) ga[ia] += go;
                              if (!gb.empty()) gb[ib] -= go;
                              break;
                            case BinOp::kMul:
                              if (!ga.empty()) ga[ia] += go * bv[ib];
                              if (!gb.empty()) gb[ib] += go * av[ia];
                              break;
                            case BinOp::kDiv:
                              if (!ga.empty()) ga[ia] += go / bv[ib];
                              if (!gb.empty()) gb[ib] -= go * av[ia] / (bv[ib] * bv[ib]);
                              break;
                          }
                        };
                        if (bc.same) {
                          for (std::size_t i = 0; i < g.size(); ++i) step(i, i, i);
                        } else {
                          for_each_broadcast(bc, step);
                        }
                      });
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinOp::kAdd, "add");
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinOp::kSub, "sub");
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinOp::kMul, "mul");
}
template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinOp::kDiv, "div");
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += s;
  return record_op<T>("add_scalar", a.shape(), std::move(out), {a}, [a](std::span<const T> g) mutable {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return record_op<T>("mul_scalar", a.shape(), std::move(out), {a}, [a, s](std::span<const T> g) mutable {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return record_op<T>("reshape", shape, std::move(out), {x}, [x](std::span<const T> g) mutable {
    auto gx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, std::span<const int> order) {
  const Shape& in = x.shape();
  const std::size_t r = in.rank();
  if (order.size() != r) {
    throw DimensionError("permute: order of length " + std::to_string(order.size()) + " for shape " + in.str());
  }
  std::vector<int> check(order.begin(), order.end());
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < r; ++i) {
    if (check[i] != static_cast<int>(i)) throw DimensionError("permute: order is not a permutation");
  }
  // Work in padded rank-4 coordinates of the output.
  std::array<Index, 4> in_dims{1, 1, 1, 1};
  for (std::size_t i = 0; i < r; ++i) in_dims[4 - r + i] = in[i];
  const auto in_strides = strides4(in_dims);
  std::vector<Index> out_dims(r);
  std::array<Index, 4> out_ext{1, 1, 1, 1};
  std::array<Index, 4> src_stride{0, 0, 0, 0};
  for (std::size_t i = 0; i < r; ++i) {
    out_dims[i] = in[order[i]];
    out_ext[4 - r + i] = in[order[i]];
    src_stride[4 - r + i] = in_strides[4 - r + order[i]];
  }
  Broadcast map;  // reuse the 4-loop walker: stride_a = source offsets
  map.extent = out_ext;
  map.stride_a = src_stride;
  const Shape out_shape(out_dims);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xv = x.data();
  for_each_broadcast(map, [&](Index o, Index src, Index) { out[o] = xv[src]; });
  return record_op<T>("permute", out_shape, std::move(out), {x}, [x, map](std::span<const T> g) mutable {
    auto gx = x.grad_buffer();
    for_each_broadcast(map, [&](Index o, Index src, Index) { gx[src] += g[o]; });
  });
}

template <typename T>
BasicTensor<T> transpose_last2(const BasicTensor<T>& x) {
  const std::size_t r = x.rank();
  if (r < 2) throw DimensionError("transpose_last2 needs rank >= 2, got " + x.shape().str());
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[r - 1], order[r - 2]);
  return permute(x, std::span<const int>(order));
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T acc{0};
  for (const T v : x.data()) acc += v;
  return record_op<T>("sum", Shape{}, std::vector<T>{acc}, {x}, [x](std::span<const T> g) mutable {
    auto gx = x.grad_buffer();
    for (auto& v : gx) v += g[0];
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return mul_scalar(sum(x), static_cast<T>(1.0 / static_cast<double>(x.numel())));
}

template <typename T>
BasicTensor<T> sum_dim(const BasicTensor<T>& x, int axis) {
  const Shape& s = x.shape();
  const int r = static_cast<int>(s.rank());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw DimensionError("sum_dim: axis out of range for " + s.str());
  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < r; ++i) inner *= s[i];
  const Index n = s[axis];
  std::vector<Index> dims;
  for (int i = 0; i < r; ++i) {
    if (i != axis) dims.push_back(s[i]);
  }
  std::vector<T> out(static_cast<std::size_t>(outer * inner), T{0});
  const auto xv = x.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index k = 0; k < n; ++k) {
      const T* src = xv.data() + (o * n + k) * inner;
      T* dst = out.data() + o * inner;
      for (Index i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return record_op<T>("sum_dim", Shape(dims), std::move(out), {x},
                      [x, outer, inner, n](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        for (Index o = 0; o < outer; ++o) {
                          for (Index k = 0; k < n; ++k) {
                            T* dst = gx.data() + (o * n + k) * inner;
                            const T* src = g.data() + o * inner;
                            for (Index i = 0; i < inner; ++i) dst[i] += src[i];
                          }
                        }
                      });
}

template <typename T>
BasicTensor<T> softmax_lastdim(const BasicTensor<T>& x, std::span<const std::uint8_t> keep) {
  if (x.rank() == 0 || x.shape().back() < 1) {
    throw DimensionError("softmax_lastdim: empty last dimension in " + x.shape().str());
  }
  if (!keep.empty() && static_cast<Index>(keep.size()) != x.numel()) {
    throw DimensionError("softmax_lastdim: mask has " + std::to_string(keep.size()) + " entries for shape " +
                         x.shape().str());
  }
  const Index n = x.shape().back();
  const Index rows = x.numel() / n;
  const auto xv = x.data();
  std::vector<T> out(xv.size(), T{0});
  for (Index r = 0; r < rows; ++r) {
    const Index base = r * n;
    bool any = false;
    T mx{0};
    for (Index j = 0; j < n; ++j) {
      if (!keep.empty() && !keep[base + j]) continue;
      mx = any ? std::max(mx, xv[base + j]) : xv[base + j];
      any = true;
    }
    if (!any) throw DimensionError("softmax_lastdim: every entry of a row is masked");
    T total{0};
    for (Index j = 0; j < n; ++j) {
      if (!keep.empty() && !keep[base + j]) continue;
      const T e = std::exp(xv[base + j] - mx);
      out[base + j] = e;
      total += e;
    }
    for (Index j = 0; j < n; ++j) out[base + j] /= total;
  }
  BasicTensor<T> y;  // output values kept for the backward rule
  if (grad_mode_enabled() && x.requires_grad()) y = BasicTensor<T>(x.shape(), out);
  return record_op<T>("softmax", x.shape(), std::move(out), {x},
                      [x, y, n, rows](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        const auto yv = y.data();
                        for (Index r = 0; r < rows; ++r) {
                          const Index base = r * n;
                          T dot{0};
                          for (Index j = 0; j < n; ++j) dot += g[base + j] * yv[base + j];
                          for (Index j = 0; j < n; ++j) gx[base + j] += yv[base + j] * (g[base + j] - dot);
                        }
                      });
}

namespace {
constexpr double kSqrt2OverPi = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluCubic * x * x * x)));
}

double swish_value(double x) { return x / (1.0 + std::exp(-x)); }

namespace {

double gelu_derivative(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

double swish_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s + x * s * (1.0 - s);
}

}  // namespace

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& x, Activation kind) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  if (kind == Activation::kGelu) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(gelu_value(xv[i]));
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(swish_value(xv[i]));
  }
  return record_op<T>(kind == Activation::kGelu ? "gelu" : "swish", x.shape(), std::move(out), {x},
                      [x, kind](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        const auto xv = x.data();
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          const double d =
                              kind == Activation::kGelu ? gelu_derivative(xv[i]) : swish_derivative(xv[i]);
                          gx[i] += g[i] * static_cast<T>(d);
                        }
                      });
}

#define STT_INSTANTIATE(T)                                                                  \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> div(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                             \
  template BasicTensor<T> mul_scalar(const BasicTensor<T>&, T);                             \
  template BasicTensor<T> reshape(const BasicTensor<T>&, const Shape&);                     \
  template BasicTensor<T> permute(const BasicTensor<T>&, std::span<const int>);             \
  template BasicTensor<T> transpose_last2(const BasicTensor<T>&);                           \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                       \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                      \
  template BasicTensor<T> sum_dim(const BasicTensor<T>&, int);                              \
  template BasicTensor<T> softmax_lastdim(const BasicTensor<T>&, std::span<const std::uint8_t>); \
  template BasicTensor<T> activation(const BasicTensor<T>&, Activation);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)
#undef STT_INSTANTIATE

}  // namespace stt
