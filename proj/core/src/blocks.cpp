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

#include "stt/blocks.hpp"

#include <cmath>

namespace stt {

using Index = std::int64_t;

std::string to_string(PosEncoding pos) {
  switch (pos) {
    case PosEncoding::kCpe: return "cpe";
    case PosEncoding::kApe: return "ape";
    case PosEncoding::kRpe: return "rpe";
  }
  return "?";
}

PosEncoding parse_pos_encoding(const std::string& text) {
  if (text == "cpe") return PosEncoding::kCpe;
  if (text == "ape") return PosEncoding::kApe;
  if (text == "rpe") return PosEncoding::kRpe;
  throw ConfigError("pos must be one of cpe, ape, rpe; got '" + text + "'");
}

ArchConfig ArchConfig::preset(const std::string& name) {
  ArchConfig c;
  c.name = name;
  c.grids = {8, 4, 1, 1};
  if (name == "svit-s") {
    c.blocks = {3, 5, 9, 3};
    c.channels = {64, 128, 320, 512};
    c.heads = {1, 2, 5, 8};
    c.drop_path = 0.1;
  } else if (name == "svit-b") {
    c.blocks = {4, 6, 14, 6};
    c.channels = {96, 192, 384, 512};
    c.heads = {2, 3, 6, 8};
    c.drop_path = 0.4;
  } else if (name == "svit-l") {
    c.blocks = {4, 7, 19, 8};
    c.channels = {96, 192, 448, 640};
    c.heads = {2, 3, 7, 10};
    c.drop_path = 0.6;
  } else if (name == "tiny") {
    c.blocks = {1, 1, 2, 1};
    c.channels = {16, 32, 64, 128};
    c.heads = {1, 2, 4, 8};
    c.grids = {4, 2, 1, 1};
    c.resolution = 32;
    c.n_classes = 2;
  } else {
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown arch '" + name + "'; presets: " + list);
  }
  c.stem = stem_for(c.channels[0]);
  return c;
}

std::vector<std::string> ArchConfig::preset_names() { return {"svit-s", "svit-b", "svit-l", "tiny"}; }

StaConfig ArchConfig::sta_config(int stage) const {
  StaConfig s;
  s.grid_h = s.grid_w = grids.at(static_cast<std::size_t>(stage));
  s.heads = heads.at(static_cast<std::size_t>(stage));
  s.n_iter = n_iter;
  s.phantom = phantom;
  return s;
}

int ArchConfig::total_blocks() const {
  int t = 0;
  for (int b : blocks) t += b;
  return t;
}

void ArchConfig::validate() const {
  if (resolution <= 0 || resolution % 32 != 0) {
    throw ConfigError("res=" + std::to_string(resolution) + " must be a positive multiple of 32");
  }
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (projection < 1 || mlp_ratio < 1) throw ConfigError("projection and mlp_ratio must be positive");
  if (n_iter < 0) throw ConfigError("n_iter must be >= 0");
  if (drop_path < 0.0 || drop_path >= 1.0) throw ConfigError("drop_path must be in [0, 1)");
  for (int c : stem) {
    if (c < 1) throw ConfigError("stem channels must be positive");
  }
  if (stem[kStemConvs - 1] != channels[0]) {
    throw ConfigError("stem must end at the stage-1 width " + std::to_string(channels[0]));
  }
  for (int s = 0; s < kStages; ++s) {
    const std::string where = "stage " + std::to_string(s + 1) + ": ";
    if (blocks[s] < 0) throw ConfigError(where + "negative block count");
    if (channels[s] < 1) throw ConfigError(where + "channels must be positive");
    if (heads[s] < 1 || channels[s] % heads[s] != 0) {
      throw ConfigError(where + "heads=" + std::to_string(heads[s]) + " must divide channels=" +
                        std::to_string(channels[s]));
    }
    if (grids[s] < 1 || stage_extent(s) % grids[s] != 0) {
      throw ConfigError(where + "grid " + std::to_string(grids[s]) + " does not divide the " +
                        std::to_string(stage_extent(s)) + "x" + std::to_string(stage_extent(s)) + " token grid");
    }
  }
}

namespace {

template <typename T>
BasicTensor<T> filled(const Shape& s, double v) {
  return BasicTensor<T>::full(s, static_cast<T>(v));
}

template <typename T>
BasicTensor<T> trunc_normal(const Shape& s, Rng& rng, double stddev = 0.02) {
  std::vector<T> v(static_cast<std::size_t>(s.numel()));
  for (auto& e : v) e = static_cast<T>(rng.truncated_normal(stddev));
  return BasicTensor<T>(s, std::move(v));
}

// Normal with variance 2 / fan_out, fan_out = k * k * cout / groups.
template <typename T>
BasicTensor<T> fan_out_normal(const Shape& s, Rng& rng, Index groups = 1) {
  const double fan_out = static_cast<double>(s[0] * s[2] * s[3] / groups);
  return rng.normal_tensor<T>(s, std::sqrt(2.0 / fan_out));
}

template <typename T>
ConvBn<T> init_conv_bn(Index cout, Index cin, Index k, Rng& rng) {
  ConvBn<T> l;
  l.kernel = k == 1 ? trunc_normal<T>(Shape{cout, cin, 1, 1}, rng) : fan_out_normal<T>(Shape{cout, cin, k, k}, rng);
  l.gain = filled<T>(Shape{cout}, 1.0);
  l.bias = filled<T>(Shape{cout}, 0.0);
  l.stats = BatchNormStats<T>::init(cout);
  return l;
}

}  // namespace

template <typename T>
SttBlockWeights<T> init_block(Index c, int heads, int mlp_ratio, PosEncoding pos, Index attn_p, Index attn_q,
                              Rng& rng) {
  SttBlockWeights<T> w;
  const Index hidden = c * mlp_ratio;
  if (pos == PosEncoding::kCpe) {
    w.cpe_kernel = fan_out_normal<T>(Shape{c, 1, 3, 3}, rng, c);
    w.cpe_bias = filled<T>(Shape{c}, 0.0);
  }
  w.ln_gain = filled<T>(Shape{c}, 1.0);
  w.ln_bias = filled<T>(Shape{c}, 0.0);
  w.sta = StaWeights<T>::init(c, rng);
  if (pos == PosEncoding::kRpe) {
    w.rpe_table = trunc_normal<T>(Shape{heads, (2 * attn_p - 1) * (2 * attn_q - 1)}, rng);
  }
  w.bn_gain = filled<T>(Shape{c}, 1.0);
  w.bn_bias = filled<T>(Shape{c}, 0.0);
  w.bn_stats = BatchNormStats<T>::init(c);
  w.ffn_expand = trunc_normal<T>(Shape{hidden, c, 1, 1}, rng);
  w.ffn_expand_bias = filled<T>(Shape{hidden}, 0.0);
  w.ffn_dw = fan_out_normal<T>(Shape{hidden, 1, 3, 3}, rng, hidden);
  w.ffn_dw_bias = filled<T>(Shape{hidden}, 0.0);
  w.ffn_reduce = trunc_normal<T>(Shape{c, hidden, 1, 1}, rng);
  w.ffn_reduce_bias = filled<T>(Shape{c}, 0.0);
  return w;
}

template <typename T>
BasicTensor<T> cpe_forward(const BasicTensor<T>& x, const SttBlockWeights<T>& w) {
  return add(x, depthwise_conv3x3(x, w.cpe_kernel, &w.cpe_bias));
}

template <typename T>
BasicTensor<T> conv_ffn_forward(const BasicTensor<T>& y, const SttBlockWeights<T>& w, bool shortcut) {
  auto h = conv2d(y, w.ffn_expand, &w.ffn_expand_bias, 1, 0);
  auto d = depthwise_conv3x3(h, w.ffn_dw, &w.ffn_dw_bias);
  if (shortcut) d = add(h, d);
  return conv2d(gelu(d), w.ffn_reduce, &w.ffn_reduce_bias, 1, 0);
}

template <typename T>
BasicTensor<T> relative_position_bias(const BasicTensor<T>& table, Index p, Index q) {
  const Index heads = table.dim(0), span_q = 2 * q - 1, m = p * q;
  if (table.rank() != 2 || table.dim(1) != (2 * p - 1) * span_q) {
    throw DimensionError("relative position table " + table.shape().str() + " does not fit a " +
                         std::to_string(p) + "x" + std::to_string(q) + " grid");
  }
  std::vector<Index> index(static_cast<std::size_t>(m * m));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      index[i * m + j] = (i / q - j / q + p - 1) * span_q + (i % q - j % q + q - 1);
    }
  const Index cols = table.dim(1);
  std::vector<T> out(static_cast<std::size_t>(heads * m * m));
  const auto tv = table.data();
  for (Index h = 0; h < heads; ++h)
    for (Index k = 0; k < m * m; ++k) out[h * m * m + k] = tv[h * cols + index[k]];
  return record_op<T>("relative_position_bias", Shape{heads, m, m}, std::move(out), {table},
                      [table, index = std::move(index), heads, cols, m](std::span<const T> g) {
                        auto gt = table.grad_buffer();
                        for (Index h = 0; h < heads; ++h)
                          for (Index k = 0; k < m * m; ++k) gt[h * cols + index[k]] += g[h * m * m + k];
                      });
}

template <typename T>
BasicTensor<T> drop_path(const BasicTensor<T>& branch, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return branch;
  if (ctx.rng == nullptr) throw UsageError("drop_path in training needs a random stream");
  const Index b = branch.dim(0);
  std::vector<T> keep(static_cast<std::size_t>(b));
  for (auto& k : keep) k = ctx.rng->uniform() < rate ? T{0} : static_cast<T>(1.0 / (1.0 - rate));
  Shape mask_shape = branch.rank() == 4 ? Shape{b, 1, 1, 1} : Shape{b, 1};
  return mul(branch, BasicTensor<T>(mask_shape, std::move(keep)));
}

template <typename T>
BasicTensor<T> stt_block_forward(const BasicTensor<T>& x, SttBlockWeights<T>& w, const BlockConfig& cfg,
                                 const ForwardContext& ctx, std::type_identity_t<BlockTrace<T>>* trace) {
  const auto x1 = w.cpe_kernel.defined() ? cpe_forward(x, w) : x;
  auto normed = layer_norm(x1, w.ln_gain, w.ln_bias);
  BasicTensor<T> bias;
  if (w.rpe_table.defined()) {
    bias = relative_position_bias(w.rpe_table, x.dim(2) / cfg.sta.grid_h, x.dim(3) / cfg.sta.grid_w);
  }
  auto attended = sta_forward(normed, cfg.sta, w.sta, bias.defined() ? &bias : nullptr,
                              trace != nullptr ? &trace->sta : nullptr);
  if (trace != nullptr) trace->sta_input = normed;
  auto y = add(x1, drop_path(attended, cfg.drop_path, ctx));
  auto ffn = conv_ffn_forward(batch_norm(y, w.bn_gain, w.bn_bias, w.bn_stats, ctx.training), w, cfg.ffn_shortcut);
  return add(y, drop_path(ffn, cfg.drop_path, ctx));
}

template <typename T>
BasicTensor<T> conv_bn_forward(const BasicTensor<T>& x, ConvBn<T>& layer, int stride, bool training) {
  const int pad = static_cast<int>(layer.kernel.dim(2) / 2);
  return batch_norm(conv2d(x, layer.kernel, nullptr, stride, pad), layer.gain, layer.bias, layer.stats, training);
}

SvitModel SvitModel::build(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SvitModel m;
  m.cfg = cfg;
  Index cin = 3;
  for (int i = 0; i < kStemConvs; ++i) {
    m.stem[i] = init_conv_bn<float>(cfg.stem[i], cin, 3, rng);
    cin = cfg.stem[i];
  }
  for (int s = 0; s < kStages; ++s) {
    const Index c = cfg.channels[s];
    if (s > 0) m.merges[s - 1] = init_conv_bn<float>(c, cfg.channels[s - 1], 3, rng);
    const Index extent = cfg.stage_extent(s);
    if (cfg.pos == PosEncoding::kApe) m.ape[s] = trunc_normal<float>(Shape{1, c, extent, extent}, rng);
    const Index attn = extent / cfg.grids[s];
    for (int j = 0; j < cfg.blocks[s]; ++j) {
      m.stages[s].push_back(init_block<float>(c, cfg.heads[s], cfg.mlp_ratio, cfg.pos, attn, attn, rng));
    }
  }
  m.projection = init_conv_bn<float>(cfg.projection, cfg.channels[kStages - 1], 1, rng);
  m.fc_weight = trunc_normal<float>(Shape{cfg.projection, cfg.n_classes}, rng);
  m.fc_bias = Tensor::zeros(Shape{cfg.n_classes});
  return m;
}

Tensor SvitModel::stem_forward(const Tensor& images, bool training) {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) % 4 != 0 || images.dim(3) % 4 != 0) {
    throw DimensionError("stem expects [b, 3, H, W] with H, W divisible by 4, got " + images.shape().str());
  }
  static constexpr std::array<int, kStemConvs> kStride{2, 1, 2, 1};
  Tensor x = images;
  for (int i = 0; i < kStemConvs; ++i) {
    x = gelu(conv2d(x, stem[i].kernel, nullptr, kStride[i], 1));
    x = batch_norm(x, stem[i].gain, stem[i].bias, stem[i].stats, training);
  }
  return x;
}

Tensor SvitModel::head_forward(const Tensor& features, bool training) {
  auto pooled = global_avg_pool(swish(conv_bn_forward(features, projection, 1, training)));
  return add(matmul(pooled, fc_weight), fc_bias);
}

Tensor SvitModel::forward(const Tensor& images, const ForwardContext& ctx, int trace_stage,
                          BlockTrace<float>* trace) {
  Tensor x = stem_forward(images, ctx.training);
  const int total = cfg.total_blocks();
  int index = 0;
  for (int s = 0; s < kStages; ++s) {
    if (s > 0) x = conv_bn_forward(x, merges[s - 1], 2, ctx.training);
    if (ape[s].defined()) x = add(x, ape[s]);
    BlockConfig bc;
    bc.sta = cfg.sta_config(s);
    bc.ffn_shortcut = cfg.ffn_shortcut;
    for (std::size_t j = 0; j < stages[s].size(); ++j, ++index) {
      bc.drop_path = total > 1 ? cfg.drop_path * index / (total - 1) : 0.0;
      BlockTrace<float>* t = (s == trace_stage && j == 0) ? trace : nullptr;
      x = stt_block_forward(x, stages[s][j], bc, ctx, t);
    }
    if (ctx.on_stage) ctx.on_stage(s, x);
  }
  return head_forward(x, ctx.training);
}

void SvitModel::visit(const std::function<void(const std::string&, Tensor&, TensorRole)>& fn) {
  auto param = [&](const std::string& name, Tensor& t) {
    if (t.defined()) fn(name, t, TensorRole::kParameter);
  };
  auto conv_bn = [&](const std::string& prefix, ConvBn<float>& l) {
    param(prefix + ".kernel", l.kernel);
    param(prefix + ".bn.gain", l.gain);
    param(prefix + ".bn.bias", l.bias);
    fn(prefix + ".bn.running_mean", l.stats.running_mean, TensorRole::kBuffer);
    fn(prefix + ".bn.running_var", l.stats.running_var, TensorRole::kBuffer);
  };
  for (int i = 0; i < kStemConvs; ++i) conv_bn("stem." + std::to_string(i), stem[i]);
  for (int s = 0; s < kStages; ++s) {
    const std::string stage = "stage" + std::to_string(s + 1);
    if (s > 0) conv_bn("merge" + std::to_string(s), merges[s - 1]);
    param(stage + ".ape", ape[s]);
    for (std::size_t j = 0; j < stages[s].size(); ++j) {
      auto& b = stages[s][j];
      const std::string p = stage + ".block" + std::to_string(j);
      param(p + ".cpe.kernel", b.cpe_kernel);
      param(p + ".cpe.bias", b.cpe_bias);
      param(p + ".ln.gain", b.ln_gain);
      param(p + ".ln.bias", b.ln_bias);
      param(p + ".sta.wq", b.sta.wq);
      param(p + ".sta.wk", b.sta.wk);
      param(p + ".sta.wv", b.sta.wv);
      param(p + ".sta.wo", b.sta.wo);
      param(p + ".rpe.table", b.rpe_table);
      param(p + ".bn.gain", b.bn_gain);
      param(p + ".bn.bias", b.bn_bias);
      fn(p + ".bn.running_mean", b.bn_stats.running_mean, TensorRole::kBuffer);
      fn(p + ".bn.running_var", b.bn_stats.running_var, TensorRole::kBuffer);
      param(p + ".ffn.expand", b.ffn_expand);
      param(p + ".ffn.expand_bias", b.ffn_expand_bias);
      param(p + ".ffn.dw", b.ffn_dw);
      param(p + ".ffn.dw_bias", b.ffn_dw_bias);
      param(p + ".ffn.reduce", b.ffn_reduce);
      param(p + ".ffn.reduce_bias", b.ffn_reduce_bias);
    }
  }
  conv_bn("head.proj", projection);
  param("head.fc.weight", fc_weight);
  param("head.fc.bias", fc_bias);
}

std::vector<Tensor> SvitModel::parameters() {
  std::vector<Tensor> out;
  visit([&](const std::string&, Tensor& t, TensorRole role) {
    if (role == TensorRole::kParameter) out.push_back(t);
  });
  return out;
}

std::int64_t SvitModel::parameter_count() {
  std::int64_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

#define STT_INSTANTIATE(T)                                                                                       \
  template SttBlockWeights<T> init_block(Index, int, int, PosEncoding, Index, Index, Rng&);                      \
  template BasicTensor<T> cpe_forward(const BasicTensor<T>&, const SttBlockWeights<T>&);                         \
  template BasicTensor<T> conv_ffn_forward(const BasicTensor<T>&, const SttBlockWeights<T>&, bool);              \
  template BasicTensor<T> relative_position_bias(const BasicTensor<T>&, Index, Index);                           \
  template BasicTensor<T> drop_path(const BasicTensor<T>&, double, const ForwardContext&);                       \
  template BasicTensor<T> stt_block_forward(const BasicTensor<T>&, SttBlockWeights<T>&, const BlockConfig&,      \
                                            const ForwardContext&, BlockTrace<T>*);                              \
  template BasicTensor<T> conv_bn_forward(const BasicTensor<T>&, ConvBn<T>&, int, bool);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

}  // namespace stt
