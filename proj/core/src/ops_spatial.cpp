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

#include <string>

#include "gemm.hpp"
#include "stt/ops.hpp"

namespace stt {
namespace {

using Index = std::int64_t;

void require_rank4(const Shape& s, const char* op) {
  if (s.rank() != 4) throw DimensionError(std::string(op) + " expects a rank-4 tensor, got " + s.str());
}

// unfold3x3 / fold3x3 share one index walk: for centre (y, x) and window cell
// (dy, dx), the source position is (y + dy - 1, x + dx - 1).
template <typename T, bool kFold>
void window_walk(Index b, Index c, Index p, Index q, const T* src, T* dst) {
  const Index pq = p * q;
  for (Index n = 0; n < b; ++n) {
    for (Index ch = 0; ch < c; ++ch) {
      const Index grid_base = (n * c + ch) * pq;
      for (Index cell = 0; cell < 9; ++cell) {
        const Index dy = cell / 3 - 1;
        const Index dx = cell % 3 - 1;
        const Index col_base = ((n * c + ch) * 9 + cell) * pq;
        for (Index y = 0; y < p; ++y) {
          const Index sy = y + dy;
          if (sy < 0 || sy >= p) continue;
          for (Index x = 0; x < q; ++x) {
            const Index sx = x + dx;
            if (sx < 0 || sx >= q) continue;
            if constexpr (kFold) {
              dst[grid_base + sy * q + sx] += src[col_base + y * q + x];
            } else {
              dst[col_base + y * q + x] += src[grid_base + sy * q + sx];
            }
          }
        }
      }
    }
  }
}

// im2col for one image: cols[(ci*kh + i)*kw + j][oy*ow + ox]
template <typename T>
void im2col(const T* img, Index cin, Index h, Index w, Index kh, Index kw, int stride, int pad, Index oh,
            Index ow, T* cols) {
  for (Index ci = 0; ci < cin; ++ci) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        T* row = cols + ((ci * kh + i) * kw + j) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + i;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + j;
            row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? img[(ci * h + iy) * w + ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, Index cin, Index h, Index w, Index kh, Index kw, int stride, int pad, Index oh,
            Index ow, T* img) {
  for (Index ci = 0; ci < cin; ++ci) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const T* row = cols + ((ci * kh + i) * kw + j) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + i;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + j;
            if (ix >= 0 && ix < w) img[(ci * h + iy) * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> adaptive_avg_pool(const BasicTensor<T>& x, Index p, Index q) {
  require_rank4(x.shape(), "adaptive_avg_pool");
  const Index b = x.dim(0), c = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (p <= 0 || q <= 0 || H % p != 0 || W % q != 0) {
    throw ConfigError("adaptive_avg_pool: output (" + std::to_string(p) + ", " + std::to_string(q) +
                      ") does not evenly divide input (H=" + std::to_string(H) + ", W=" + std::to_string(W) + ")");
  }
  const Index bh = H / p, bw = W / q;
  const T inv = static_cast<T>(1.0 / static_cast<double>(bh * bw));
  std::vector<T> out(static_cast<std::size_t>(b * c * p * q), T{0});
  const auto xv = x.data();
  for (Index plane = 0; plane < b * c; ++plane) {
    for (Index y = 0; y < H; ++y) {
      for (Index xx = 0; xx < W; ++xx) {
        out[(plane * p + y / bh) * q + xx / bw] += xv[(plane * H + y) * W + xx];
      }
    }
  }
  for (auto& v : out) v *= inv;
  detail::add_macs(static_cast<std::uint64_t>(x.numel()));
  return record_op<T>("adaptive_avg_pool", Shape{b, c, p, q}, std::move(out), {x},
                      [x, p, q, bh, bw, inv](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        const Index planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
                        for (Index plane = 0; plane < planes; ++plane) {
                          for (Index y = 0; y < H; ++y) {
                            for (Index xx = 0; xx < W; ++xx) {
                              gx[(plane * H + y) * W + xx] += g[(plane * p + y / bh) * q + xx / bw] * inv;
                            }
                          }
                        }
                      });
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  require_rank4(x.shape(), "global_avg_pool");
  const Index b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
  std::vector<T> out(static_cast<std::size_t>(b * c), T{0});
  const auto xv = x.data();
  for (Index plane = 0; plane < b * c; ++plane) {
    T acc{0};
    for (Index i = 0; i < hw; ++i) acc += xv[plane * hw + i];
    out[plane] = acc * inv;
  }
  detail::add_macs(static_cast<std::uint64_t>(x.numel()));
  return record_op<T>("global_avg_pool", Shape{b, c}, std::move(out), {x}, [x, hw, inv](std::span<const T> g) mutable {
    auto gx = x.grad_buffer();
    for (std::size_t plane = 0; plane < g.size(); ++plane) {
      for (Index i = 0; i < hw; ++i) gx[plane * hw + i] += g[plane] * inv;
    }
  });
}

template <typename T>
BasicTensor<T> unfold3x3(const BasicTensor<T>& x) {
  require_rank4(x.shape(), "unfold3x3");
  const Index b = x.dim(0), c = x.dim(1), p = x.dim(2), q = x.dim(3);
  if (p < 1 || q < 1) throw DimensionError("unfold3x3: empty grid " + x.shape().str());
  std::vector<T> out(static_cast<std::size_t>(b * c * 9 * p * q), T{0});
  window_walk<T, false>(b, c, p, q, x.data().data(), out.data());
  return record_op<T>("unfold3x3", Shape{b, c * 9, p * q}, std::move(out), {x},
                      [x, b, c, p, q](std::span<const T> g) mutable {
                        window_walk<T, true>(b, c, p, q, g.data(), x.grad_buffer().data());
                      });
}

template <typename T>
BasicTensor<T> fold3x3(const BasicTensor<T>& x, Index p, Index q) {
  if (x.rank() != 3 || x.dim(1) % 9 != 0 || x.dim(2) != p * q || p < 1 || q < 1) {
    throw DimensionError("fold3x3: shape " + x.shape().str() + " does not fold onto a " + std::to_string(p) + "x" +
                         std::to_string(q) + " grid");
  }
  const Index b = x.dim(0), c = x.dim(1) / 9;
  std::vector<T> out(static_cast<std::size_t>(b * c * p * q), T{0});
  window_walk<T, true>(b, c, p, q, x.data().data(), out.data());
  return record_op<T>("fold3x3", Shape{b, c, p, q}, std::move(out), {x},
                      [x, b, c, p, q](std::span<const T> g) mutable {
                        window_walk<T, false>(b, c, p, q, g.data(), x.grad_buffer().data());
                      });
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const std::type_identity_t<BasicTensor<T>>* bias, int stride,
                      int pad) {
  require_rank4(x.shape(), "conv2d");
  require_rank4(kernel.shape(), "conv2d kernel");
  const Index b = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv2d: kernel " + kernel.shape().str() + " does not match input " + x.shape().str());
  }
  if (stride < 1 || pad < 0 || h + 2 * pad < kh || w + 2 * pad < kw) {
    throw DimensionError("conv2d: invalid geometry for input " + x.shape().str() + " with kernel " +
                         kernel.shape().str() + ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
    throw DimensionError("conv2d: bias " + bias->shape().str() + " for " + std::to_string(cout) + " output channels");
  }
  const Index oh = (h + 2 * pad - kh) / stride + 1;
  const Index ow = (w + 2 * pad - kw) / stride + 1;
  const Index patch = cin * kh * kw;
  const Index npix = oh * ow;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
  std::vector<T> out(static_cast<std::size_t>(b * cout * npix), T{0});
  std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(patch * npix));
  const T* kv = kernel.data().data();
  for (Index n = 0; n < b; ++n) {
    const T* img = x.data().data() + n * cin * h * w;
    const T* src = img;
    if (!pointwise) {
      im2col(img, cin, h, w, kh, kw, stride, pad, oh, ow, cols.data());
      src = cols.data();
    }
    T* dst = out.data() + n * cout * npix;
    if (bias) {
      for (Index co = 0; co < cout; ++co) {
        const T bv = bias->data()[co];
        for (Index i = 0; i < npix; ++i) dst[co * npix + i] = bv;
      }
    }
    gemm_nn<T>(cout, npix, patch, kv, src, dst);
  }
  detail::add_macs(static_cast<std::uint64_t>(b * cout * patch * npix));
  const BasicTensor<T> bias_t = bias ? *bias : BasicTensor<T>::zeros(Shape{cout});
  const bool has_bias = bias != nullptr;
  return record_op<T>(
      "conv2d", Shape{b, cout, oh, ow}, std::move(out), {x, kernel, bias_t},
      [x, kernel, bias_t, has_bias, b, cin, h, w, cout, kh, kw, stride, pad, oh, ow, patch, npix,
       pointwise](std::span<const T> g) mutable {
        std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(patch * npix));
        std::vector<T> dcols(static_cast<std::size_t>(patch * npix));
        const T* kv = kernel.data().data();
        for (Index n = 0; n < b; ++n) {
          const T* go = g.data() + n * cout * npix;
          const T* img = x.data().data() + n * cin * h * w;
          if (kernel.requires_grad()) {
            const T* src = img;
            if (!pointwise) {
              im2col(img, cin, h, w, kh, kw, stride, pad, oh, ow, cols.data());
              src = cols.data();
            }
            gemm_nt<T>(cout, patch, npix, go, src, kernel.grad_buffer().data());
          }
          if (x.requires_grad()) {
            T* gx = x.grad_buffer().data() + n * cin * h * w;
            if (pointwise) {
              gemm_tn<T>(cin, npix, cout, kv, go, gx);
            } else {
              std::fill(dcols.begin(), dcols.end(), T{0});
              gemm_tn<T>(patch, npix, cout, kv, go, dcols.data());
              col2im(dcols.data(), cin, h, w, kh, kw, stride, pad, oh, ow, gx);
            }
          }
          if (has_bias && bias_t.requires_grad()) {
            auto gb = bias_t.grad_buffer();
            for (Index co = 0; co < cout; ++co) {
              T acc{0};
              for (Index i = 0; i < npix; ++i) acc += go[co * npix + i];
              gb[co] += acc;
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> depthwise_conv3x3(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                                 const std::type_identity_t<BasicTensor<T>>* bias) {
  require_rank4(x.shape(), "depthwise_conv3x3");
  const Index b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (kernel.shape() != Shape{c, 1, 3, 3}) {
    throw DimensionError("depthwise_conv3x3: kernel " + kernel.shape().str() + " for input " + x.shape().str());
  }
  if (bias && bias->shape() != Shape{c}) {
    throw DimensionError("depthwise_conv3x3: bias " + bias->shape().str() + " for " + std::to_string(c) + " channels");
  }
  std::vector<T> out(static_cast<std::size_t>(x.numel()), T{0});
  const auto xv = x.data();
  const auto kv = kernel.data();
  for (Index n = 0; n < b; ++n) {
    for (Index ch = 0; ch < c; ++ch) {
      const T* src = xv.data() + (n * c + ch) * h * w;
      T* dst = out.data() + (n * c + ch) * h * w;
      const T* k = kv.data() + ch * 9;
      const T bv = bias ? bias->data()[ch] : T{0};
      for (Index y = 0; y < h; ++y) {
        for (Index xx = 0; xx < w; ++xx) {
          T acc = bv;
          for (Index i = 0; i < 3; ++i) {
            const Index sy = y + i - 1;
            if (sy < 0 || sy >= h) continue;
            for (Index j = 0; j < 3; ++j) {
              const Index sx = xx + j - 1;
              if (sx < 0 || sx >= w) continue;
              acc += k[i * 3 + j] * src[sy * w + sx];
            }
          }
          dst[y * w + xx] = acc;
        }
      }
    }
  }
  detail::add_macs(static_cast<std::uint64_t>(x.numel() * 9));
  const BasicTensor<T> bias_t = bias ? *bias : BasicTensor<T>::zeros(Shape{c});
  const bool has_bias = bias != nullptr;
  return record_op<T>(
      "depthwise_conv3x3", x.shape(), std::move(out), {x, kernel, bias_t},
      [x, kernel, bias_t, has_bias, b, c, h, w](std::span<const T> g) mutable {
        const auto xv = x.data();
        const auto kv = kernel.data();
        std::span<T> gx = x.requires_grad() ? x.grad_buffer() : std::span<T>{};
        std::span<T> gk = kernel.requires_grad() ? kernel.grad_buffer() : std::span<T>{};
        std::span<T> gb = (has_bias && bias_t.requires_grad()) ? bias_t.grad_buffer() : std::span<T>{};
        for (Index n = 0; n < b; ++n) {
          for (Index ch = 0; ch < c; ++ch) {
            const Index base = (n * c + ch) * h * w;
            const T* k = kv.data() + ch * 9;
            for (Index y = 0; y < h; ++y) {
              for (Index xx = 0; xx < w; ++xx) {
                const T go = g[base + y * w + xx];
                if (!gb.empty()) gb[ch] += go;
                for (Index i = 0; i < 3; ++i) {
                  const Index sy = y + i - 1;
                  if (sy < 0 || sy >= h) continue;
                  for (Index j = 0; j < 3; ++j) {
                    const Index sx = xx + j - 1;
                    if (sx < 0 || sx >= w) continue;
                    if (!gx.empty()) gx[base + sy * w + sx] += k[i * 3 + j] * go;
                    if (!gk.empty()) gk[ch * 9 + i * 3 + j] += xv[base + sy * w + sx] * go;
                  }
                }
              }
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> grid_partition(const BasicTensor<T>& x, Index h, Index w) {
  require_rank4(x.shape(), "grid_partition");
  const Index b = x.dim(0), c = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (h <= 0 || w <= 0 || H % h != 0 || W % w != 0) {
    throw ConfigError("grid_partition: grid " + std::to_string(h) + "x" + std::to_string(w) +
                      " does not divide " + std::to_string(H) + "x" + std::to_string(W));
  }
  const Index p = H / h, q = W / w;
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xv = x.data();
  // out[n][cy*q+cx][ty*w+tx][ch] = x[n][ch][cy*h+ty][cx*w+tx]
  for (Index n = 0; n < b; ++n) {
    for (Index ch = 0; ch < c; ++ch) {
      for (Index y = 0; y < H; ++y) {
        for (Index xx = 0; xx < W; ++xx) {
          const Index cell = (y / h) * q + xx / w;
          const Index tok = (y % h) * w + xx % w;
          out[((n * p * q + cell) * h * w + tok) * c + ch] = xv[((n * c + ch) * H + y) * W + xx];
        }
      }
    }
  }
  return record_op<T>("grid_partition", Shape{b, p * q, h * w, c}, std::move(out), {x},
                      [x, b, c, H, W, h, w, p, q](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        for (Index n = 0; n < b; ++n) {
                          for (Index ch = 0; ch < c; ++ch) {
                            for (Index y = 0; y < H; ++y) {
                              for (Index xx = 0; xx < W; ++xx) {
                                const Index cell = (y / h) * q + xx / w;
                                const Index tok = (y % h) * w + xx % w;
                                gx[((n * c + ch) * H + y) * W + xx] += g[((n * p * q + cell) * h * w + tok) * c + ch];
                              }
                            }
                          }
                        }
                      });
}

template <typename T>
BasicTensor<T> grid_merge(const BasicTensor<T>& x, Index p, Index q, Index h, Index w) {
  if (x.rank() != 4 || x.dim(1) != p * q || x.dim(2) != h * w) {
    throw DimensionError("grid_merge: shape " + x.shape().str() + " is not a " + std::to_string(p) + "x" +
                         std::to_string(q) + " grid of " + std::to_string(h) + "x" + std::to_string(w) + " cells");
  }
  const Index b = x.dim(0), c = x.dim(3), H = p * h, W = q * w;
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xv = x.data();
  for (Index n = 0; n < b; ++n) {
    for (Index ch = 0; ch < c; ++ch) {
      for (Index y = 0; y < H; ++y) {
        for (Index xx = 0; xx < W; ++xx) {
          const Index cell = (y / h) * q + xx / w;
          const Index tok = (y % h) * w + xx % w;
          out[((n * c + ch) * H + y) * W + xx] = xv[((n * p * q + cell) * h * w + tok) * c + ch];
        }
      }
    }
  }
  return record_op<T>("grid_merge", Shape{b, c, H, W}, std::move(out), {x},
                      [x, b, c, H, W, h, w, p, q](std::span<const T> g) mutable {
                        auto gx = x.grad_buffer();
                        for (Index n = 0; n < b; ++n) {
                          for (Index ch = 0; ch < c; ++ch) {
                            for (Index y = 0; y < H; ++y) {
                              for (Index xx = 0; xx < W; ++xx) {
                                const Index cell = (y / h) * q + xx / w;
                                const Index tok = (y % h) * w + xx % w;
                                gx[((n * p * q + cell) * h * w + tok) * c + ch] += g[((n * c + ch) * H + y) * W + xx];
                              }
                            }
                          }
                        }
                      });
}

#define STT_INSTANTIATE(T)                                                                                \
  template BasicTensor<T> adaptive_avg_pool(const BasicTensor<T>&, Index, Index);                         \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                         \
  template BasicTensor<T> unfold3x3(const BasicTensor<T>&);                                               \
  template BasicTensor<T> fold3x3(const BasicTensor<T>&, Index, Index);                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*, int, \
                                 int);                                                                    \
  template BasicTensor<T> depthwise_conv3x3(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                            const BasicTensor<T>*);                                       \
  template BasicTensor<T> grid_partition(const BasicTensor<T>&, Index, Index);                            \
  template BasicTensor<T> grid_merge(const BasicTensor<T>&, Index, Index, Index, Index);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)
#undef STT_INSTANTIATE

}  // namespace stt
