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

// Binary PPM (P6) and PGM (P5) images with maxval <= 255.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

struct Image {
  int width = 0, height = 0, channels = 0;  // channels: 3 for P6, 1 for P5
  std::vector<std::uint8_t> pixels;         // row-major, channel-last

  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// DataError with the byte offset of the first malformed field.
Image read_pnm(const std::filesystem::path& path);
Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_pnm(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_pnm(const Image& image);

// Unit-scaled [1, 3, size, size] input. Images larger than `size` by an exact
// integer factor are box-averaged, smaller ones replicated; any other extent
// is a DataError.
Tensor image_to_input(const Image& image, int size);

// Nearest-neighbour enlargement by an integer factor.
Image upscale(const Image& image, int factor);

}  // namespace stt
