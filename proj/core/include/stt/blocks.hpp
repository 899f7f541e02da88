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

// Super token transformer blocks and the hierarchical classifier built from
// them:
//
//   image -> stem (4 convs) -> [blocks, merge] x 4 -> 1x1 projection -> GAP -> FC
//
// One block is
//   X = CPE(X_in) + X_in
//   Y = STA(LN(X)) + X
//   Z = ConvFFN(BN(Y)) + Y

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "stt/ops.hpp"
#include "stt/random.hpp"
#include "stt/sta.hpp"

namespace stt {

enum class PosEncoding { kCpe, kApe, kRpe };

std::string to_string(PosEncoding pos);
PosEncoding parse_pos_encoding(const std::string& text);

inline constexpr int kStages = 4;
inline constexpr int kStemConvs = 4;

struct ArchConfig {
  std::string name = "custom";
  std::array<int, kStages> blocks{};
  std::array<int, kStages> channels{};
  std::array<int, kStages> heads{};
  std::array<int, kStages> grids{};  // square super-token cell size per stage; 1 = global attention
  std::array<int, kStemConvs> stem{};
  int resolution = 224;
  int n_classes = 1000;
  int projection = 1024;
  int mlp_ratio = 4;
  int n_iter = 1;
  PhantomMode phantom = PhantomMode::kLiteral;
  PosEncoding pos = PosEncoding::kCpe;
  bool ffn_shortcut = true;
  double drop_path = 0.0;

  static ArchConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  // Stem plan [c0/2, c0/2, c0, c0] for stage-1 width c0.
  static std::array<int, kStemConvs> stem_for(int c0) { return {c0 / 2, c0 / 2, c0, c0}; }
  // Token grid side of stage s at this resolution.
  int stage_extent(int s) const { return resolution / 4 >> s; }
  StaConfig sta_config(int stage) const;
  int total_blocks() const;
  // Throws ConfigError naming the offending stage.
  void validate() const;
};

template <typename T>
struct ConvBn {
  BasicTensor<T> kernel;  // [cout, cin, k, k], no bias
  BasicTensor<T> gain, bias;
  BatchNormStats<T> stats;
};

template <typename T>
struct SttBlockWeights {
  BasicTensor<T> cpe_kernel, cpe_bias;  // [C, 1, 3, 3], [C]; undefined without CPE
  BasicTensor<T> ln_gain, ln_bias;
  StaWeights<T> sta;
  BasicTensor<T> rpe_table;  // [heads, (2P-1)(2Q-1)] over the attended grid; undefined without RPE
  BasicTensor<T> bn_gain, bn_bias;
  BatchNormStats<T> bn_stats;
  BasicTensor<T> ffn_expand, ffn_expand_bias;  // [rC, C, 1, 1], [rC]
  BasicTensor<T> ffn_dw, ffn_dw_bias;          // [rC, 1, 3, 3], [rC]
  BasicTensor<T> ffn_reduce, ffn_reduce_bias;  // [C, rC, 1, 1], [C]

  std::int64_t channels() const { return ln_gain.numel(); }
};

struct BlockConfig {
  StaConfig sta;
  bool ffn_shortcut = true;
  double drop_path = 0.0;
};

// Per-call state: BN mode, drop-path randomness and optional inspection.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with drop_path > 0
  std::function<void(int stage, const Tensor& output)> on_stage;  // model forward only
};

template <typename T>
struct BlockTrace {
  BasicTensor<T> sta_input;  // LN(X), the tokens STA saw
  StaTrace<T> sta;
};

// Shapes for a block of width c over an attended p x q grid (RPE only).
template <typename T>
SttBlockWeights<T> init_block(std::int64_t c, int heads, int mlp_ratio, PosEncoding pos, std::int64_t attn_p,
                              std::int64_t attn_q, Rng& rng);

template <typename T>
BasicTensor<T> cpe_forward(const BasicTensor<T>& x, const SttBlockWeights<T>& w);

template <typename T>
BasicTensor<T> conv_ffn_forward(const BasicTensor<T>& y, const SttBlockWeights<T>& w, bool shortcut = true);

// [heads, (2P-1)(2Q-1)] table -> [heads, PQ, PQ] bias indexed by relative offset.
template <typename T>
BasicTensor<T> relative_position_bias(const BasicTensor<T>& table, std::int64_t p, std::int64_t q);

template <typename T>
BasicTensor<T> stt_block_forward(const BasicTensor<T>& x, SttBlockWeights<T>& w, const BlockConfig& cfg,
                                 const ForwardContext& ctx, std::type_identity_t<BlockTrace<T>>* trace = nullptr);

// Randomly zeroes whole samples of a residual branch in training, scaling
// survivors by 1 / (1 - rate).
template <typename T>
BasicTensor<T> drop_path(const BasicTensor<T>& branch, double rate, const ForwardContext& ctx);

template <typename T>
BasicTensor<T> conv_bn_forward(const BasicTensor<T>& x, ConvBn<T>& layer, int stride, bool training);

enum class TensorRole { kParameter, kBuffer };

struct SvitModel {
  ArchConfig cfg;
  std::array<ConvBn<float>, kStemConvs> stem;
  std::array<std::vector<SttBlockWeights<float>>, kStages> stages;
  std::array<ConvBn<float>, kStages - 1> merges;
  std::array<Tensor, kStages> ape;  // [1, C, H, W]; undefined without APE
  ConvBn<float> projection;
  Tensor fc_weight, fc_bias;  // [projection, n_classes], [n_classes]

  // Deterministic initialization from (cfg, seed).
  static SvitModel build(const ArchConfig& cfg, std::uint64_t seed);

  // images [b, 3, R, R] -> logits [b, n_classes]. When trace is given, it
  // receives the first block of `trace_stage`.
  Tensor forward(const Tensor& images, const ForwardContext& ctx, int trace_stage = -1,
                 BlockTrace<float>* trace = nullptr);
  Tensor stem_forward(const Tensor& images, bool training);
  Tensor head_forward(const Tensor& features, bool training);

  // Every tensor with a stable dotted name, in a fixed order.
  void visit(const std::function<void(const std::string&, Tensor&, TensorRole)>& fn);
  std::vector<Tensor> parameters();
  std::int64_t parameter_count();
};

}  // namespace stt
