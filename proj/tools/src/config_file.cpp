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

#include "stt/tools/config_file.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace stt {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename N>
N parse_number(const std::string& text, const std::string& where) {
  N v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": '" + text + "' is not a valid number");
  return v;
}

std::array<int, kStages> parse_stages(const std::string& text, const std::string& where) {
  std::array<int, kStages> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == kStages) break;
    out[n++] = parse_number<int>(trim(item), where);
  }
  if (n != kStages || std::getline(ss, item, ',')) {
    throw ConfigError(where + ": expected " + std::to_string(kStages) + " comma-separated values, got '" + text + "'");
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  // First pass collects entries so `arch` can be applied before the keys that
  // modify it, wherever it appears.
  struct Entry {
    std::string value;
    std::string where;
  };
  std::map<std::string, Entry> entries;
  std::stringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const std::string where = source + ":" + std::to_string(number);
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected 'key = value'");
    if (!entries.emplace(key, Entry{value, where}).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }

  RunConfig cfg;
  if (auto it = entries.find("arch"); it != entries.end()) {
    try {
      cfg.arch = ArchConfig::preset(it->second.value);
    } catch (const ConfigError& e) {
      throw ConfigError(it->second.where + ": " + e.what());
    }
    entries.erase(it);
  }
  bool channels_set = false;
  for (const auto& [key, e] : entries) {
    const auto& v = e.value;
    const auto& w = e.where;
    if (key == "res") {
      cfg.arch.resolution = parse_number<int>(v, w);
    } else if (key == "grids") {
      cfg.arch.grids = parse_stages(v, w);
    } else if (key == "blocks") {
      cfg.arch.blocks = parse_stages(v, w);
    } else if (key == "channels") {
      cfg.arch.channels = parse_stages(v, w);
      channels_set = true;
    } else if (key == "heads") {
      cfg.arch.heads = parse_stages(v, w);
    } else if (key == "n_iter") {
      cfg.arch.n_iter = parse_number<int>(v, w);
    } else if (key == "phantom_mode") {
      cfg.arch.phantom = parse_phantom_mode(v);
    } else if (key == "pos") {
      cfg.arch.pos = parse_pos_encoding(v);
    } else if (key == "drop_path") {
      cfg.arch.drop_path = parse_number<double>(v, w);
    } else if (key == "n_classes") {
      cfg.n_classes = parse_number<int>(v, w);
    } else if (key == "optimizer") {
      cfg.opt.kind = parse_optimizer_kind(v);
    } else if (key == "lr") {
      cfg.opt.lr = parse_number<double>(v, w);
    } else if (key == "wd") {
      cfg.opt.weight_decay = parse_number<double>(v, w);
    } else if (key == "steps") {
      cfg.opt.steps = parse_number<int>(v, w);
    } else if (key == "batch") {
      cfg.opt.batch = parse_number<int>(v, w);
    } else if (key == "seed") {
      cfg.opt.seed = parse_number<std::uint64_t>(v, w);
    } else if (key == "clip_norm") {
      cfg.opt.clip_norm = parse_number<double>(v, w);
    } else if (key == "eval_every") {
      cfg.eval_every = parse_number<int>(v, w);
    } else {
      throw ConfigError(w + ": unknown key '" + key + "'");
    }
  }
  if (channels_set) cfg.arch.stem = ArchConfig::stem_for(cfg.arch.channels[0]);
  if (cfg.n_classes) cfg.arch.n_classes = *cfg.n_classes;
  cfg.arch.validate();
  cfg.opt.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

}  // namespace stt
