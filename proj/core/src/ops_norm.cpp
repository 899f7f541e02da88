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

#include <cmath>
#include <string>

#include "stt/ops.hpp"

namespace stt {
namespace {

using Index = std::int64_t;

// Shared by both norms: element (outer o, channel ch, inner i) lives at
// (o * channels + ch) * inner + i. A "group" is the set of elements that are
// normalized together.
struct NormLayout {
  Index outer = 1;
  Index channels = 1;
  Index inner = 1;
};

NormLayout layout_of(const Shape& s, const char* op) {
  if (s.rank() < 2) throw DimensionError(std::string(op) + " expects [b, c, ...], got " + s.str());
  NormLayout l;
  l.outer = s[0];
  l.channels = s[1];
  for (std::size_t i = 2; i < s.rank(); ++i) l.inner *= s[i];
  return l;
}

void check_affine(const Shape& gain, const Shape& bias, Index c, const char* op) {
  if (gain != Shape{c} || bias != Shape{c}) {
    throw DimensionError(std::string(op) + ": gain " + gain.str() + " / bias " + bias.str() + " for " +
                         std::to_string(c) + " channels");
  }
}

}  // namespace

template <typename T>
BatchNormStats<T> BatchNormStats<T>::init(std::int64_t channels) {
  return {BasicTensor<T>::zeros(Shape{channels}), BasicTensor<T>::full(Shape{channels}, T{1})};
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          double eps) {
  const NormLayout l = layout_of(x.shape(), "layer_norm");
  if (l.channels == 0) throw DimensionError("layer_norm: zero channels in " + x.shape().str());
  check_affine(gain.shape(), bias.shape(), l.channels, "layer_norm");
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  const Index tokens = l.outer * l.inner;
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(static_cast<std::size_t>(tokens));
  std::vector<T> out(xv.size());
  for (Index o = 0; o < l.outer; ++o) {
    for (Index i = 0; i < l.inner; ++i) {
      const Index base = o * l.channels * l.inner + i;
      double m = 0.0;
      for (Index ch = 0; ch < l.channels; ++ch) m += xv[base + ch * l.inner];
      m /= static_cast<double>(l.channels);
      double v = 0.0;
      for (Index ch = 0; ch < l.channels; ++ch) {
        const double d = xv[base + ch * l.inner] - m;
        v += d * d;
      }
      v /= static_cast<double>(l.channels);
      const double is = 1.0 / std::sqrt(v + eps);
      inv_std[o * l.inner + i] = static_cast<T>(is);
      for (Index ch = 0; ch < l.channels; ++ch) {
        const Index idx = base + ch * l.inner;
        xhat[idx] = static_cast<T>((xv[idx] - m) * is);
        out[idx] = xhat[idx] * gv[ch] + bv[ch];
      }
    }
  }
  return record_op<T>("layer_norm", x.shape(), std::move(out), {x, gain, bias},
                      [x, gain, bias, l, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)](std::span<const T> g) mutable {
                        const auto gv = gain.data();
                        std::span<T> gx = x.requires_grad() ? x.grad_buffer() : std::span<T>{};
                        std::span<T> gg = gain.requires_grad() ? gain.grad_buffer() : std::span<T>{};
                        std::span<T> gb = bias.requires_grad() ? bias.grad_buffer() : std::span<T>{};
                        const double inv_c = 1.0 / static_cast<double>(l.channels);
                        for (Index o = 0; o < l.outer; ++o) {
                          for (Index i = 0; i < l.inner; ++i) {
                            const Index base = o * l.channels * l.inner + i;
                            double sum_d = 0.0, sum_dx = 0.0;
                            for (Index ch = 0; ch < l.channels; ++ch) {
                              const Index idx = base + ch * l.inner;
                              const double d = static_cast<double>(g[idx]) * gv[ch];
                              sum_d += d;
                              sum_dx += d * xhat[idx];
                              if (!gg.empty()) gg[ch] += g[idx] * xhat[idx];
                              if (!gb.empty()) gb[ch] += g[idx];
                            }
                            if (gx.empty()) continue;
                            const double is = inv_std[o * l.inner + i];
                            for (Index ch = 0; ch < l.channels; ++ch) {
                              const Index idx = base + ch * l.inner;
                              const double d = static_cast<double>(g[idx]) * gv[ch];
                              gx[idx] += static_cast<T>(is * (d - sum_d * inv_c - xhat[idx] * sum_dx * inv_c));
                            }
                          }
                        }
                      });
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          BatchNormStats<T>& stats, bool training, double momentum, double eps) {
  const NormLayout l = layout_of(x.shape(), "batch_norm");
  check_affine(gain.shape(), bias.shape(), l.channels, "batch_norm");
  check_affine(stats.running_mean.shape(), stats.running_var.shape(), l.channels, "batch_norm stats");
  const Index count = l.outer * l.inner;
  if (count == 0) throw DimensionError("batch_norm: zero-size reduction over " + x.shape().str());
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(static_cast<std::size_t>(l.channels));
  std::vector<T> out(xv.size());
  for (Index ch = 0; ch < l.channels; ++ch) {
    double m, v;
    if (training) {
      m = 0.0;
      for (Index o = 0; o < l.outer; ++o) {
        for (Index i = 0; i < l.inner; ++i) m += xv[(o * l.channels + ch) * l.inner + i];
      }
      m /= static_cast<double>(count);
      v = 0.0;
      for (Index o = 0; o < l.outer; ++o) {
        for (Index i = 0; i < l.inner; ++i) {
          const double d = xv[(o * l.channels + ch) * l.inner + i] - m;
          v += d * d;
        }
      }
      const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : v;
      v /= static_cast<double>(count);
      auto rm = stats.running_mean.mutable_data();
      auto rv = stats.running_var.mutable_data();
      rm[ch] = static_cast<T>((1.0 - momentum) * rm[ch] + momentum * m);
      rv[ch] = static_cast<T>((1.0 - momentum) * rv[ch] + momentum * unbiased);
    } else {
      m = stats.running_mean.data()[ch];
      v = stats.running_var.data()[ch];
    }
    const double is = 1.0 / std::sqrt(v + eps);
    inv_std[ch] = static_cast<T>(is);
    for (Index o = 0; o < l.outer; ++o) {
      for (Index i = 0; i < l.inner; ++i) {
        const Index idx = (o * l.channels + ch) * l.inner + i;
        xhat[idx] = static_cast<T>((xv[idx] - m) * is);
        out[idx] = xhat[idx] * gv[ch] + bv[ch];
      }
    }
  }
  return record_op<T>(
      "batch_norm", x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, l, count, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const T> g) mutable {
        const auto gv = gain.data();
        std::span<T> gx = x.requires_grad() ? x.grad_buffer() : std::span<T>{};
        std::span<T> gg = gain.requires_grad() ? gain.grad_buffer() : std::span<T>{};
        std::span<T> gb = bias.requires_grad() ? bias.grad_buffer() : std::span<T>{};
        const double inv_n = 1.0 / static_cast<double>(count);
        for (Index ch = 0; ch < l.channels; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (Index o = 0; o < l.outer; ++o) {
            for (Index i = 0; i < l.inner; ++i) {
              const Index idx = (o * l.channels + ch) * l.inner + i;
              sum_g += g[idx];
              sum_gx += static_cast<double>(g[idx]) * xhat[idx];
            }
          }
          if (!gg.empty()) gg[ch] += static_cast<T>(sum_gx);
          if (!gb.empty()) gb[ch] += static_cast<T>(sum_g);
          if (gx.empty()) continue;
          const double scale = static_cast<double>(gv[ch]) * inv_std[ch];
          for (Index o = 0; o < l.outer; ++o) {
            for (Index i = 0; i < l.inner; ++i) {
              const Index idx = (o * l.channels + ch) * l.inner + i;
              double d = g[idx];
              if (training) d -= sum_g * inv_n + xhat[idx] * sum_gx * inv_n;
              gx[idx] += static_cast<T>(scale * d);
            }
          }
        }
      });
}

template struct BatchNormStats<float>;
template struct BatchNormStats<double>;

#define STT_INSTANTIATE(T)                                                                                    \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
                                     double);                                                                 \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
                                     BatchNormStats<T>&, bool, double, double);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)
#undef STT_INSTANTIATE

}  // namespace stt
