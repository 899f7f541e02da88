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

// Super-token segmentations and effective-attention heatmaps for the first
// block of a stage.

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stt/blocks.hpp"
#include "stt/tools/image_io.hpp"

namespace stt {

// Super token (row-major index on the p x q grid) each token is assigned to:
// the argmax of its association over in-bounds slots. Weights within 1e-5 tie;
// ties go to the token's own cell (slot 4), then to the lowest slot index. Result is [H * W],
// row-major over tokens, for batch element 0.
std::vector<int> segment_tokens(const AssociationMap<float>& q);

// The same map for the initial regular grid: every token in its own cell.
std::vector<int> regular_grid(int height, int width, int grid_h, int grid_w);

int count_regions(const std::vector<int>& assignment);

struct Visualization {
  int stage = 0;               // 0-based
  int token_h = 0, token_w = 0;
  int grid_p = 0, grid_q = 0;  // super-token grid
  std::vector<int> assignment;
  std::pair<int, int> anchor;  // token coordinates
  std::vector<double> attention_row;  // head-averaged effective attention of the anchor, [H * W]
  Image segmentation;          // RGB at image resolution, region boundaries drawn dark
  Image heatmap;               // grayscale at image resolution, max = 255
};

// `image` is [1, 3, R, R] at the model resolution. Throws ConfigError when
// the stage attends globally (1x1 grid) and UsageError for an anchor outside
// the stage's token grid. The default anchor is the centre token.
Visualization visualize(SvitModel& model, const Tensor& image, int stage,
                        std::optional<std::pair<int, int>> anchor = std::nullopt);

}  // namespace stt
