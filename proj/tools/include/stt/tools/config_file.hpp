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

// Run configuration files: one `key = value` per line, `#` starts a comment.
//
//   arch          preset the remaining keys modify (default tiny)
//   res           input resolution
//   grids blocks channels heads
//                 four comma-separated integers, one per stage
//   n_iter phantom_mode (literal | masked) pos (cpe | ape | rpe) drop_path
//   n_classes     defaults to the training set's class count
//   optimizer (adamw | sgd) lr wd steps batch seed clip_norm eval_every
//
// Unknown keys and malformed values are ConfigErrors naming the line.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "stt/blocks.hpp"
#include "stt/train.hpp"

namespace stt {

struct RunConfig {
  ArchConfig arch = ArchConfig::preset("tiny");
  std::optional<int> n_classes;
  OptimizerConfig opt;
  int eval_every = 100;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace stt
