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

// Synthetic image classification data.
//
// File layout, little-endian:
//
//   "STDS" | u16 version = 1 | u32 n_samples | u16 height | u16 width
//   | u8 channels | u8 n_classes
//   n_samples x ( u8 label | height*width*channels u8 pixels, row-major,
//                 channel-last )

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

enum class DatasetKind { kQuadrantBlobs, kStripedTextures };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);

struct SyntheticDatasetSpec {
  DatasetKind kind = DatasetKind::kQuadrantBlobs;
  int n_classes = 2;  // 2..10
  int height = 32;
  int width = 32;
  int channels = 3;
  int samples_per_class = 256;
  std::uint64_t seed = 7;
  // Sample i is drawn from stream (seed, first_index + i), so a split
  // generated with first_index = n is disjoint from one of n samples at 0.
  std::uint64_t first_index = 0;

  void validate() const;
};

struct Dataset {
  int height = 0, width = 0, channels = 0, n_classes = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  // n * height * width * channels, channel-last

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t sample_bytes() const { return static_cast<std::int64_t>(height) * width * channels; }
  // Unit-scaled [n, channels, height, width] batch of the given samples.
  Tensor images(std::span<const std::int64_t> indices) const;
  std::vector<int> labels_of(std::span<const std::int64_t> indices) const;
};

// Rendering of region `region` of a regions_per_side^2 layout; class c of
// quadrant-blobs puts its blob in region c.
int regions_per_side(int n_classes);

Dataset gen_dataset(const SyntheticDatasetSpec& spec);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
// DataError with the byte offset on malformed input.
Dataset read_dataset(const std::filesystem::path& path);

// Unit-scaled [1, channels, height, width] image from channel-last bytes.
Tensor image_from_bytes(std::span<const std::uint8_t> pixels, int height, int width, int channels);

}  // namespace stt
