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

#include "stt/sta.hpp"

#include <array>
#include <cmath>

namespace stt {

using Index = std::int64_t;

std::string to_string(PhantomMode mode) { return mode == PhantomMode::kLiteral ? "literal" : "masked"; }

PhantomMode parse_phantom_mode(const std::string& text) {
  if (text == "literal") return PhantomMode::kLiteral;
  if (text == "masked") return PhantomMode::kMasked;
  throw ConfigError("phantom_mode must be 'literal' or 'masked', got '" + text + "'");
}

void StaConfig::validate(const Shape& x) const {
  if (x.rank() != 4) throw DimensionError("attention input must be [b, C, H, W], got " + x.str());
  if (grid_h < 1 || grid_w < 1) throw ConfigError("grid extents must be positive");
  if (n_iter < 0) throw ConfigError("n_iter must be >= 0, got " + std::to_string(n_iter));
  if (heads < 1 || x[1] % heads != 0) {
    throw ConfigError("heads=" + std::to_string(heads) + " must divide channels C=" + std::to_string(x[1]));
  }
  if (x[2] % grid_h != 0 || x[3] % grid_w != 0) {
    throw ConfigError("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) + " does not divide H=" +
                      std::to_string(x[2]) + ", W=" + std::to_string(x[3]));
  }
}

template <typename T>
StaWeights<T> StaWeights<T>::init(Index channels, Rng& rng, double stddev) {
  auto make = [&] {
    std::vector<T> v(static_cast<std::size_t>(channels * channels));
    for (auto& e : v) e = static_cast<T>(rng.truncated_normal(stddev));
    return BasicTensor<T>(Shape{channels, channels}, std::move(v));
  };
  StaWeights w;
  w.wq = make();
  w.wk = make();
  w.wv = make();
  w.wo = make();
  return w;
}

std::vector<std::uint8_t> slot_validity(Index p, Index q) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(p * q * kSlots));
  for (Index y = 0; y < p; ++y) {
    for (Index x = 0; x < q; ++x) {
      for (int k = 0; k < kSlots; ++k) {
        const Index ny = y + k / 3 - 1;
        const Index nx = x + k % 3 - 1;
        keep[static_cast<std::size_t>((y * q + x) * kSlots + k)] = ny >= 0 && ny < p && nx >= 0 && nx < q;
      }
    }
  }
  return keep;
}

template <typename T>
SuperTokens<T> init_super_tokens(const BasicTensor<T>& x, const StaConfig& cfg) {
  cfg.validate(x.shape());
  return {adaptive_avg_pool(x, x.dim(2) / cfg.grid_h, x.dim(3) / cfg.grid_w)};
}

namespace {

// [b, C, p, q] -> [b, p*q, C, 9]: the 3x3 neighbourhood of every cell.
template <typename T>
BasicTensor<T> neighbourhoods(const BasicTensor<T>& s) {
  const Index b = s.dim(0), c = s.dim(1), m = s.dim(2) * s.dim(3);
  return reshape(transpose_last2(unfold3x3(s)), Shape{b, m, c, kSlots});
}

}  // namespace

template <typename T>
AssociationMap<T> compute_association(const BasicTensor<T>& cells, const SuperTokens<T>& s, const StaConfig& cfg) {
  const Index b = cells.dim(0), m = cells.dim(1), hw = cells.dim(2), c = cells.dim(3);
  if (s.s.dim(0) != b || s.s.dim(1) != c || s.m() != m) {
    throw DimensionError("association: cells " + cells.shape().str() + " do not match super tokens " +
                         s.s.shape().str());
  }
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
  auto logits = mul_scalar(matmul(cells, neighbourhoods(s.s)), scale);  // [b, m, hw, 9]

  BasicTensor<T> weights;
  if (cfg.phantom == PhantomMode::kMasked) {
    const auto valid = slot_validity(s.p(), s.q());
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(logits.numel()));
    for (Index bi = 0; bi < b; ++bi)
      for (Index g = 0; g < m; ++g)
        for (Index t = 0; t < hw; ++t)
          for (int k = 0; k < kSlots; ++k) {
            keep[static_cast<std::size_t>(((bi * m + g) * hw + t) * kSlots + k)] =
                valid[static_cast<std::size_t>(g * kSlots + k)];
          }
    weights = softmax_lastdim(logits, keep);
  } else {
    weights = softmax_lastdim(logits);
  }
  return AssociationMap<T>::from_weights(std::move(weights), s.p(), s.q(), cfg.grid_h, cfg.grid_w);
}

template <typename T>
AssociationMap<T> AssociationMap<T>::from_weights(BasicTensor<T> weights, Index p, Index q, Index h, Index w) {
  const Shape expected{weights.rank() == 4 ? weights.dim(0) : 0, p * q, h * w, kSlots};
  if (weights.shape() != expected) {
    throw DimensionError("association weights " + weights.shape().str() + " do not fit a " + std::to_string(p) +
                         "x" + std::to_string(q) + " grid of " + std::to_string(h) + "x" + std::to_string(w) +
                         " cells");
  }
  AssociationMap out;
  // Weight landing on each super token: scatter per-cell slot totals.
  out.column_sum = fold3x3(transpose_last2(sum_dim(weights, 2)), p, q);
  out.q = std::move(weights);
  out.p = p;
  out.grid_q = q;
  out.h = h;
  out.w = w;
  return out;
}

template <typename T>
SuperTokens<T> update_super_tokens(const BasicTensor<T>& cells, const AssociationMap<T>& q, const StaConfig& cfg) {
  const Index b = cells.dim(0), c = cells.dim(3), m = cells.dim(1);
  static constexpr std::array<int, 4> kOrder{0, 2, 3, 1};
  auto weighted = matmul(transpose_last2(cells), q.q);  // [b, m, C, 9]
  auto cols = reshape(permute(weighted, std::span<const int>(kOrder)), Shape{b, c * kSlots, m});
  auto summed = fold3x3(cols, q.p, q.grid_q);
  return {div(summed, add_scalar(q.column_sum, static_cast<T>(cfg.eps)))};
}

template <typename T>
StsResult<T> sts(const BasicTensor<T>& x, const StaConfig& cfg) {
  StsResult<T> r;
  r.s = init_super_tokens(x, cfg);
  const auto cells = grid_partition(x, cfg.grid_h, cfg.grid_w);
  if (cfg.n_iter == 0) {
    r.q = compute_association(cells, r.s, cfg);
    return r;
  }
  for (int it = 0; it < cfg.n_iter; ++it) {
    r.q = compute_association(cells, r.s, cfg);
    r.s = update_super_tokens(cells, r.q, cfg);
  }
  return r;
}

template <typename T>
BasicTensor<T> mhsa_tokens(const BasicTensor<T>& tokens, const StaWeights<T>& w, int heads,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias, std::type_identity_t<BasicTensor<T>>* attention) {
  if (tokens.rank() != 3) throw DimensionError("mhsa: tokens must be [b, n, C], got " + tokens.shape().str());
  const Index b = tokens.dim(0), n = tokens.dim(1), c = tokens.dim(2);
  if (heads < 1 || c % heads != 0) {
    throw ConfigError("heads=" + std::to_string(heads) + " must divide channels C=" + std::to_string(c));
  }
  if (w.channels() != c) {
    throw DimensionError("mhsa: weights for C=" + std::to_string(w.channels()) + ", tokens " + tokens.shape().str());
  }
  const Index d = c / heads;
  static constexpr std::array<int, 4> kSplit{0, 2, 1, 3};
  auto split = [&](const BasicTensor<T>& wt) {  // [b, heads, n, d]
    return permute(reshape(matmul(tokens, wt), Shape{b, n, heads, d}), std::span<const int>(kSplit));
  };
  const auto qh = split(w.wq), kh = split(w.wk), vh = split(w.wv);
  auto logits = mul_scalar(matmul(qh, transpose_last2(kh)), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
  if (logit_bias != nullptr) logits = add(logits, *logit_bias);
  auto attn = softmax_lastdim(logits);
  if (attention != nullptr) *attention = attn;
  auto mixed = permute(matmul(attn, vh), std::span<const int>(kSplit));  // [b, n, heads, d]
  return matmul(reshape(mixed, Shape{b, n, c}), w.wo);
}

namespace {

// [b, C, H, W] <-> [b, H*W, C]
template <typename T>
BasicTensor<T> to_tokens(const BasicTensor<T>& x) {
  return transpose_last2(reshape(x, Shape{x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}));
}
template <typename T>
BasicTensor<T> from_tokens(const BasicTensor<T>& t, Index h, Index w) {
  return reshape(transpose_last2(t), Shape{t.dim(0), t.dim(2), h, w});
}

}  // namespace

template <typename T>
BasicTensor<T> mhsa_super(const BasicTensor<T>& s, const StaWeights<T>& w, int heads,
                          const std::type_identity_t<BasicTensor<T>>* logit_bias, std::type_identity_t<BasicTensor<T>>* attention) {
  if (s.rank() != 4) throw DimensionError("mhsa_super: expected [b, C, p, q], got " + s.shape().str());
  return from_tokens(mhsa_tokens(to_tokens(s), w, heads, logit_bias, attention), s.dim(2), s.dim(3));
}

template <typename T>
BasicTensor<T> token_upsample(const AssociationMap<T>& q, const BasicTensor<T>& attn_s) {
  if (attn_s.rank() != 4 || attn_s.dim(2) != q.p || attn_s.dim(3) != q.grid_q || attn_s.dim(0) != q.q.dim(0)) {
    throw DimensionError("token_upsample: association for a " + std::to_string(q.p) + "x" +
                         std::to_string(q.grid_q) + " grid, super tokens " + attn_s.shape().str());
  }
  auto per_cell = matmul(neighbourhoods(attn_s), transpose_last2(q.q));  // [b, m, C, hw]
  return grid_merge(transpose_last2(per_cell), q.p, q.grid_q, q.h, q.w);
}

template <typename T>
BasicTensor<T> gsa_forward(const BasicTensor<T>& x, const StaWeights<T>& w, int heads,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias, std::type_identity_t<BasicTensor<T>>* attention) {
  if (x.rank() != 4) throw DimensionError("gsa: expected [b, C, H, W], got " + x.shape().str());
  return from_tokens(mhsa_tokens(to_tokens(x), w, heads, logit_bias, attention), x.dim(2), x.dim(3));
}

template <typename T>
BasicTensor<T> sta_forward(const BasicTensor<T>& x, const StaConfig& cfg, const StaWeights<T>& w,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias, std::type_identity_t<StaTrace<T>>* trace) {
  cfg.validate(x.shape());
  if (cfg.is_global()) {
    BasicTensor<T> attn;
    auto out = gsa_forward(x, w, cfg.heads, logit_bias, trace ? &attn : nullptr);
    if (trace != nullptr) {
      trace->sts = {};
      trace->sts.s.s = x;
      trace->attention = attn;
    }
    return out;
  }
  auto r = sts(x, cfg);
  BasicTensor<T> attn;
  auto attended = mhsa_super(r.s.s, w, cfg.heads, logit_bias, trace ? &attn : nullptr);
  auto out = token_upsample(r.q, attended);
  if (trace != nullptr) {
    trace->sts = std::move(r);
    trace->attention = attn;
  }
  return out;
}

#define STT_INSTANTIATE(T)                                                                                      \
  template struct StaWeights<T>;                                                                                \
  template struct AssociationMap<T>;                                                                             \
  template SuperTokens<T> init_super_tokens(const BasicTensor<T>&, const StaConfig&);                         \
  template AssociationMap<T> compute_association(const BasicTensor<T>&, const SuperTokens<T>&,                 \
                                                 const StaConfig&);                                             \
  template SuperTokens<T> update_super_tokens(const BasicTensor<T>&, const AssociationMap<T>&, const StaConfig&); \
  template StsResult<T> sts(const BasicTensor<T>&, const StaConfig&);                                           \
  template BasicTensor<T> mhsa_tokens(const BasicTensor<T>&, const StaWeights<T>&, int, const BasicTensor<T>*, \
                                      BasicTensor<T>*);                                                         \
  template BasicTensor<T> mhsa_super(const BasicTensor<T>&, const StaWeights<T>&, int, const BasicTensor<T>*,  \
                                     BasicTensor<T>*);                                                          \
  template BasicTensor<T> token_upsample(const AssociationMap<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> gsa_forward(const BasicTensor<T>&, const StaWeights<T>&, int, const BasicTensor<T>*, \
                                      BasicTensor<T>*);                                                         \
  template BasicTensor<T> sta_forward(const BasicTensor<T>&, const StaConfig&, const StaWeights<T>&,            \
                                      const BasicTensor<T>*, StaTrace<T>*);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

}  // namespace stt
