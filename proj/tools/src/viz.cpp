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

#include "stt/tools/viz.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stt/sta_oracle.hpp"

namespace stt {

namespace {

constexpr int kCentreSlot = 4;
// Weights closer than this are ties: super tokens that agree mathematically
// still differ by a few ulps after the column-normalized update.
constexpr float kTieTolerance = 1e-5f;

std::array<std::uint8_t, 3> region_colour(int region) {
  // Golden-angle hue walk; neighbouring indices get distant hues.
  const double hue = std::fmod(region * 137.50776, 360.0) / 60.0;
  const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(60 + 180 * v)); };
  return {to8(r), to8(g), to8(b)};
}

}  // namespace

std::vector<int> segment_tokens(const AssociationMap<float>& q) {
  const auto p = q.p, gq = q.grid_q, h = q.h, w = q.w;
  const auto valid = slot_validity(p, gq);
  const auto v = q.q.data();
  std::vector<int> out(static_cast<std::size_t>(p * h * gq * w));
  for (std::int64_t ci = 0; ci < p; ++ci)
    for (std::int64_t cj = 0; cj < gq; ++cj) {
      const std::int64_t cell = ci * gq + cj;
      for (std::int64_t ti = 0; ti < h; ++ti)
        for (std::int64_t tj = 0; tj < w; ++tj) {
          const float* row = v.data() + ((cell * h * w) + ti * w + tj) * kSlots;
          int best = kCentreSlot;
          for (int k = 0; k < kSlots; ++k) {
            if (!valid[static_cast<std::size_t>(cell * kSlots + k)]) continue;
            // Ascending scan: ties keep the centre, else the lowest slot.
            if (row[k] > row[best] + kTieTolerance) best = k;
          }
          const std::int64_t si = ci + best / 3 - 1, sj = cj + best % 3 - 1;
          out[static_cast<std::size_t>((ci * h + ti) * gq * w + cj * w + tj)] = static_cast<int>(si * gq + sj);
        }
    }
  return out;
}

std::vector<int> regular_grid(int height, int width, int grid_h, int grid_w) {
  std::vector<int> out(static_cast<std::size_t>(height) * width);
  const int q = width / grid_w;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out[static_cast<std::size_t>(y) * width + x] = (y / grid_h) * q + x / grid_w;
  return out;
}

int count_regions(const std::vector<int>& assignment) {
  return static_cast<int>(std::set<int>(assignment.begin(), assignment.end()).size());
}

Visualization visualize(SvitModel& model, const Tensor& image, int stage, std::optional<std::pair<int, int>> anchor) {
  const auto& cfg = model.cfg;
  if (stage < 0 || stage >= kStages) {
    throw UsageError("stage must be in [1, " + std::to_string(kStages) + "], got " + std::to_string(stage + 1));
  }
  if (cfg.grids[stage] == 1) {
    throw ConfigError("stage " + std::to_string(stage + 1) + " attends globally (1x1 grid); no super tokens to show");
  }
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(2) != cfg.resolution || image.dim(3) != cfg.resolution) {
    throw DimensionError("visualize expects [1, 3, " + std::to_string(cfg.resolution) + ", " +
                         std::to_string(cfg.resolution) + "], got " + image.shape().str());
  }
  NoGradGuard no_grad;
  BlockTrace<float> trace;
  model.forward(image, ForwardContext{}, stage, &trace);

  Visualization v;
  v.stage = stage;
  v.token_h = static_cast<int>(trace.sta_input.dim(2));
  v.token_w = static_cast<int>(trace.sta_input.dim(3));
  const auto sta_cfg = cfg.sta_config(stage);
  v.grid_p = v.token_h / sta_cfg.grid_h;
  v.grid_q = v.token_w / sta_cfg.grid_w;
  v.anchor = anchor.value_or(std::pair{v.token_h / 2, v.token_w / 2});
  if (v.anchor.first < 0 || v.anchor.first >= v.token_h || v.anchor.second < 0 || v.anchor.second >= v.token_w) {
    throw UsageError("anchor " + std::to_string(v.anchor.first) + "," + std::to_string(v.anchor.second) +
                     " is outside the " + std::to_string(v.token_h) + "x" + std::to_string(v.token_w) +
                     " token grid of stage " + std::to_string(stage + 1));
  }
  v.assignment = segment_tokens(trace.sta.sts.q);

  const int factor = cfg.resolution / v.token_h;
  Image seg;
  seg.width = v.token_w;
  seg.height = v.token_h;
  seg.channels = 3;
  for (int y = 0; y < v.token_h; ++y)
    for (int x = 0; x < v.token_w; ++x) {
      const auto c = region_colour(v.assignment[static_cast<std::size_t>(y) * v.token_w + x]);
      seg.pixels.insert(seg.pixels.end(), c.begin(), c.end());
    }
  v.segmentation = upscale(seg, factor);
  // Darken the image pixels on a token edge where the region changes.
  auto region_at = [&](int py, int px) {
    return v.assignment[static_cast<std::size_t>(py / factor) * v.token_w + px / factor];
  };
  for (int y = 0; y < v.segmentation.height; ++y)
    for (int x = 0; x < v.segmentation.width; ++x) {
      const int r = region_at(y, x);
      const bool edge = (x + 1 < v.segmentation.width && region_at(y, x + 1) != r) ||
                        (y + 1 < v.segmentation.height && region_at(y + 1, x) != r);
      if (!edge) continue;
      for (int c = 0; c < 3; ++c) v.segmentation.pixels[(static_cast<std::size_t>(y) * v.segmentation.width + x) * 3 + c] /= 4;
    }

  const auto& block = model.stages[stage][0];
  Tensor bias;
  if (block.rpe_table.defined()) bias = relative_position_bias(block.rpe_table, v.grid_p, v.grid_q);
  const auto dense = sta_dense_oracle(trace.sta_input, sta_cfg, block.sta, bias.defined() ? &bias : nullptr);
  const std::int64_t n = dense.n, a = static_cast<std::int64_t>(v.anchor.first) * v.token_w + v.anchor.second;
  v.attention_row.assign(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t hd = 0; hd < dense.heads; ++hd)
    for (std::int64_t j = 0; j < n; ++j) v.attention_row[static_cast<std::size_t>(j)] += dense.effective_at(0, hd, a, j) / dense.heads;
  const double top = *std::max_element(v.attention_row.begin(), v.attention_row.end());
  Image heat;
  heat.width = v.token_w;
  heat.height = v.token_h;
  heat.channels = 1;
  for (double e : v.attention_row) {
    heat.pixels.push_back(static_cast<std::uint8_t>(top > 0.0 ? std::lround(255.0 * std::max(e, 0.0) / top) : 0));
  }
  v.heatmap = upscale(heat, factor);
  return v;
}

}  // namespace stt
