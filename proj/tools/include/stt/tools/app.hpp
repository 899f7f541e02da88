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

// The `stt` command line: flops, verify, gen-data, train, infer, viz.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;   // bad flags, configuration or geometry
inline constexpr int kExitData = 3;    // unreadable or malformed files
inline constexpr int kExitVerify = 4;  // a verification check failed

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stt
