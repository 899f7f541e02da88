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

#include "stt/sta_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stt {

namespace {

using Index = std::int64_t;
using Matrix = std::vector<double>;  // row-major, extents tracked by the caller

Matrix multiply(const Matrix& a, const Matrix& b, Index n, Index k, Index m) {
  Matrix c(static_cast<std::size_t>(n * m), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      for (Index j = 0; j < m; ++j) c[i * m + j] += av * b[t * m + j];
    }
  return c;
}

void softmax_rows(Matrix& a, Index rows, Index cols) {
  for (Index i = 0; i < rows; ++i) {
    double* row = a.data() + i * cols;
    const double mx = *std::max_element(row, row + cols);
    double s = 0.0;
    for (Index j = 0; j < cols; ++j) s += (row[j] = std::exp(row[j] - mx));
    for (Index j = 0; j < cols; ++j) row[j] /= s;
  }
}

struct Geometry {
  Index H, W, h, w, p, q, n, m, c;
  Index cell_of(Index token) const { return (token / W / h) * q + (token % W) / w; }
};

// Dense association [N x m] of every token with the super tokens S [m x C].
Matrix associate(const Matrix& x, const Matrix& s, const Geometry& g, PhantomMode mode) {
  Matrix qd(static_cast<std::size_t>(g.n * g.m), 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g.c));
  const double excluded = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < g.n; ++i) {
    const Index cell = g.cell_of(i);
    const Index cy = cell / g.q, cx = cell % g.q;
    double logit[9];
    Index target[9];
    for (int k = 0; k < 9; ++k) {
      const Index ny = cy + k / 3 - 1, nx = cx + k % 3 - 1;
      const bool inside = ny >= 0 && ny < g.p && nx >= 0 && nx < g.q;
      target[k] = inside ? ny * g.q + nx : -1;
      if (!inside) {
        logit[k] = mode == PhantomMode::kLiteral ? 0.0 : excluded;
        continue;
      }
      double dot = 0.0;
      for (Index ch = 0; ch < g.c; ++ch) dot += x[i * g.c + ch] * s[target[k] * g.c + ch];
      logit[k] = dot * scale;
    }
    double mx = excluded;
    for (double l : logit) mx = std::max(mx, l);
    double z = 0.0;
    for (double& l : logit) z += (l = std::exp(l - mx));
    for (int k = 0; k < 9; ++k) {
      if (target[k] >= 0) qd[i * g.m + target[k]] = logit[k] / z;
    }
  }
  return qd;
}

// Column-normalized transpose [m x N]: row j is token weights of super token j.
Matrix column_normalized_transpose(const Matrix& qd, const Geometry& g, double eps) {
  Matrix r(static_cast<std::size_t>(g.m * g.n));
  for (Index j = 0; j < g.m; ++j) {
    double col = 0.0;
    for (Index i = 0; i < g.n; ++i) col += qd[i * g.m + j];
    for (Index i = 0; i < g.n; ++i) r[j * g.n + i] = qd[i * g.m + j] / (col + eps);
  }
  return r;
}

}  // namespace

template <typename T>
DenseSta sta_dense_oracle(const BasicTensor<T>& x, const StaConfig& cfg, const StaWeights<T>& w,
                          const std::type_identity_t<BasicTensor<T>>* logit_bias) {
  cfg.validate(x.shape());
  Geometry g{};
  g.H = x.dim(2);
  g.W = x.dim(3);
  g.h = cfg.grid_h;
  g.w = cfg.grid_w;
  g.p = g.H / g.h;
  g.q = g.W / g.w;
  g.n = g.H * g.W;
  g.m = g.p * g.q;
  g.c = x.dim(1);
  if (g.n * g.m > kOracleMaxEntries) {
    throw ConfigError("dense oracle refuses N*m = " + std::to_string(g.n * g.m) + " > " +
                      std::to_string(kOracleMaxEntries));
  }
  const Index batch = x.dim(0), heads = cfg.heads, d = g.c / heads;
  if (logit_bias != nullptr && logit_bias->shape() != Shape{heads, g.m, g.m}) {
    throw DimensionError("dense oracle: logit bias " + logit_bias->shape().str() + " for " + std::to_string(heads) +
                         " heads over " + std::to_string(g.m) + " tokens");
  }
  const Matrix wq(w.wq.data().begin(), w.wq.data().end());
  const Matrix wk(w.wk.data().begin(), w.wk.data().end());
  const Matrix wv(w.wv.data().begin(), w.wv.data().end());
  const Matrix wo(w.wo.data().begin(), w.wo.data().end());

  DenseSta out;
  out.batch = batch;
  out.channels = g.c;
  out.n = g.n;
  out.m = g.m;
  out.heads = heads;
  out.output.assign(static_cast<std::size_t>(batch * g.c * g.n), 0.0);

  for (Index bi = 0; bi < batch; ++bi) {
    // Tokens as rows: X [N x C].
    Matrix xt(static_cast<std::size_t>(g.n * g.c));
    for (Index ch = 0; ch < g.c; ++ch)
      for (Index i = 0; i < g.n; ++i) xt[i * g.c + ch] = x.data()[(bi * g.c + ch) * g.n + i];

    Matrix qd, r;
    if (cfg.is_global()) {
      qd.assign(static_cast<std::size_t>(g.n * g.n), 0.0);
      for (Index i = 0; i < g.n; ++i) qd[i * g.n + i] = 1.0;
      r = qd;
    } else {
      // Initial aggregation: plain average over each cell.
      r.assign(static_cast<std::size_t>(g.m * g.n), 0.0);
      for (Index i = 0; i < g.n; ++i) r[g.cell_of(i) * g.n + i] = 1.0 / static_cast<double>(g.h * g.w);
      Matrix s = multiply(r, xt, g.m, g.n, g.c);
      qd = associate(xt, s, g, cfg.phantom);
      for (int it = 0; it < cfg.n_iter; ++it) {
        if (it > 0) qd = associate(xt, s, g, cfg.phantom);
        r = column_normalized_transpose(qd, g, cfg.eps);
        s = multiply(r, xt, g.m, g.n, g.c);
      }
    }
    const Matrix s = multiply(r, xt, g.m, g.n, g.c);
    const Matrix sq = multiply(s, wq, g.m, g.c, g.c);
    const Matrix sk = multiply(s, wk, g.m, g.c, g.c);
    const Matrix xv = multiply(xt, wv, g.n, g.c, g.c);

    Matrix mixed(static_cast<std::size_t>(g.n * g.c), 0.0);  // [N x C], heads concatenated
    for (Index hd = 0; hd < heads; ++hd) {
      Matrix a(static_cast<std::size_t>(g.m * g.m));
      const double scale = 1.0 / std::sqrt(static_cast<double>(d));
      for (Index i = 0; i < g.m; ++i)
        for (Index j = 0; j < g.m; ++j) {
          double dot = 0.0;
          for (Index t = 0; t < d; ++t) dot += sq[i * g.c + hd * d + t] * sk[j * g.c + hd * d + t];
          a[i * g.m + j] = dot * scale;
          if (logit_bias != nullptr) a[i * g.m + j] += logit_bias->data()[(hd * g.m + i) * g.m + j];
        }
      softmax_rows(a, g.m, g.m);
      out.attention.insert(out.attention.end(), a.begin(), a.end());

      const Matrix eff = multiply(multiply(qd, a, g.n, g.m, g.m), r, g.n, g.m, g.n);  // [N x N]
      out.effective.insert(out.effective.end(), eff.begin(), eff.end());
      for (Index i = 0; i < g.n; ++i)
        for (Index j = 0; j < g.n; ++j) {
          const double e = eff[i * g.n + j];
          if (e == 0.0) continue;
          for (Index t = 0; t < d; ++t) mixed[i * g.c + hd * d + t] += e * xv[j * g.c + hd * d + t];
        }
    }
    const Matrix y = multiply(mixed, wo, g.n, g.c, g.c);
    for (Index ch = 0; ch < g.c; ++ch)
      for (Index i = 0; i < g.n; ++i) out.output[(bi * g.c + ch) * g.n + i] = y[i * g.c + ch];
    out.association.insert(out.association.end(), qd.begin(), qd.end());
    out.aggregation.insert(out.aggregation.end(), r.begin(), r.end());
  }
  return out;
}

template DenseSta sta_dense_oracle(const BasicTensor<float>&, const StaConfig&, const StaWeights<float>&,
                                   const BasicTensor<float>*);
template DenseSta sta_dense_oracle(const BasicTensor<double>&, const StaConfig&, const StaWeights<double>&,
                                   const BasicTensor<double>*);

}  // namespace stt
