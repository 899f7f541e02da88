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

// Weight files.
//
//   "STWT" | u16 version = 1 | u32 count
//   count x ( u16 name_len | name (UTF-8) | u8 rank | rank x u32 extent | f32 data )
//
// All integers and floats little-endian. Model checkpoints carry every
// parameter and BN running statistic by dotted name, plus a "meta.arch"
// tensor describing the architecture so a file is self-contained.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stt/blocks.hpp"

namespace stt {

inline constexpr char kArchMetaName[] = "meta.arch";

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
// Throws DataError with the byte offset of the first malformed field.
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

std::vector<float> encode_arch(const ArchConfig& cfg);
ArchConfig decode_arch(std::span<const float> values);

void save_model(const std::filesystem::path& path, SvitModel& model);
// Rebuilds the architecture from the file and loads every tensor; missing,
// extra or mis-shaped entries are DataErrors.
SvitModel load_model(const std::filesystem::path& path);

}  // namespace stt
