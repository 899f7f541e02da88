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

// Super token attention.
//
// Tokens X [b, C, H, W] are grouped into a p x q grid of h x w cells. Each
// token is softly associated with the 9 super tokens around its cell (Q),
// super tokens are re-estimated as Q-weighted token means, attended to with
// ordinary multi-head self-attention, and mapped back to tokens through Q.
// Everything is expressed with differentiable ops, so gradients flow through
// the association as well as the attention.

#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "stt/ops.hpp"
#include "stt/random.hpp"
#include "stt/tensor.hpp"

namespace stt {

// How out-of-bounds neighbour slots at the grid border are treated.
//   kLiteral: zero-padded super token, logit 0, keeps its softmax mass.
//   kMasked:  excluded from the softmax, weight exactly 0.
enum class PhantomMode { kLiteral, kMasked };

std::string to_string(PhantomMode mode);
PhantomMode parse_phantom_mode(const std::string& text);

inline constexpr int kSlots = 9;

struct StaConfig {
  std::int64_t grid_h = 1;
  std::int64_t grid_w = 1;
  int heads = 1;
  int n_iter = 1;
  double eps = 1e-12;
  PhantomMode phantom = PhantomMode::kLiteral;

  // 1 x 1 cells: tokens are their own super tokens, plain global attention.
  bool is_global() const { return grid_h == 1 && grid_w == 1; }
  // Throws ConfigError unless the grid divides [.., C, H, W] and heads divides C.
  void validate(const Shape& x) const;
};

template <typename T>
struct SuperTokens {
  BasicTensor<T> s;  // [b, C, p, q]
  std::int64_t p() const { return s.dim(2); }
  std::int64_t q() const { return s.dim(3); }
  std::int64_t m() const { return p() * q(); }
};

template <typename T>
struct AssociationMap {
  BasicTensor<T> q;           // [b, p*q, h*w, 9]; slot k is neighbour (k / 3 - 1, k % 3 - 1)
  BasicTensor<T> column_sum;  // [b, 1, p, q]: total weight received by each super token
  std::int64_t p = 0, grid_q = 0, h = 0, w = 0;

  // Wraps slot weights for a p x q grid of h x w cells and derives column_sum.
  static AssociationMap from_weights(BasicTensor<T> weights, std::int64_t p, std::int64_t q, std::int64_t h,
                                     std::int64_t w);
};

template <typename T>
struct StaWeights {
  BasicTensor<T> wq, wk, wv, wo;  // [C, C], applied as x W

  static StaWeights init(std::int64_t channels, Rng& rng, double stddev = 0.02);
  std::int64_t channels() const { return wq.dim(0); }
  std::vector<BasicTensor<T>> tensors() const { return {wq, wk, wv, wo}; }
};

// Per-slot validity for a p x q grid: keep[g * 9 + k] is 1 when the neighbour
// of cell g in slot k lies inside the grid.
std::vector<std::uint8_t> slot_validity(std::int64_t p, std::int64_t q);

template <typename T>
SuperTokens<T> init_super_tokens(const BasicTensor<T>& x, const StaConfig& cfg);

// cells: grid_partition(X) [b, p*q, h*w, C].
template <typename T>
AssociationMap<T> compute_association(const BasicTensor<T>& cells, const SuperTokens<T>& s, const StaConfig& cfg);

template <typename T>
SuperTokens<T> update_super_tokens(const BasicTensor<T>& cells, const AssociationMap<T>& q, const StaConfig& cfg);

template <typename T>
struct StsResult {
  SuperTokens<T> s;
  AssociationMap<T> q;
};

// init, then n_iter rounds of association + update. With n_iter = 0 the
// association is computed once against the pooled super tokens, which are
// returned unchanged.
template <typename T>
StsResult<T> sts(const BasicTensor<T>& x, const StaConfig& cfg);

// Multi-head self-attention over tokens [b, n, C]. `logit_bias`, when given,
// is added to the scaled logits ([heads, n, n]). `attention`, when given,
// receives the [b, heads, n, n] attention maps.
template <typename T>
BasicTensor<T> mhsa_tokens(const BasicTensor<T>& tokens, const StaWeights<T>& w, int heads,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias = nullptr, std::type_identity_t<BasicTensor<T>>* attention = nullptr);

// Attention among the super tokens of [b, C, p, q]; same layout out.
template <typename T>
BasicTensor<T> mhsa_super(const BasicTensor<T>& s, const StaWeights<T>& w, int heads,
                          const std::type_identity_t<BasicTensor<T>>* logit_bias = nullptr, std::type_identity_t<BasicTensor<T>>* attention = nullptr);

// [b, C, p, q] -> [b, C, p*h, q*w] through the association.
template <typename T>
BasicTensor<T> token_upsample(const AssociationMap<T>& q, const BasicTensor<T>& attn_s);

// Intermediate values of one forward pass, for inspection.
template <typename T>
struct StaTrace {
  StsResult<T> sts;
  BasicTensor<T> attention;  // [b, heads, m, m]
};

template <typename T>
BasicTensor<T> sta_forward(const BasicTensor<T>& x, const StaConfig& cfg, const StaWeights<T>& w,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias = nullptr, std::type_identity_t<StaTrace<T>>* trace = nullptr);

// Global multi-head self-attention over all H*W tokens of [b, C, H, W].
template <typename T>
BasicTensor<T> gsa_forward(const BasicTensor<T>& x, const StaWeights<T>& w, int heads,
                           const std::type_identity_t<BasicTensor<T>>* logit_bias = nullptr, std::type_identity_t<BasicTensor<T>>* attention = nullptr);

}  // namespace stt
