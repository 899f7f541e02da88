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

#include "stt/checkpoint.hpp"

#include <map>

#include "stt/binary_io.hpp"

namespace stt {

namespace {
constexpr char kMagic[4] = {'S', 'T', 'W', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kArchVersion = 1;
}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw DataError("tensor name too long: " + name.substr(0, 64) + "...");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t i = 0; i < t.rank(); ++i) w.u32(static_cast<std::uint32_t>(t.dim(i)));
    for (float v : t.data()) w.f32(v);
  }
  w.save(path);
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kMagic);
  const auto version = r.u16();
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported weight file version " + std::to_string(version), r.offset() - 2);
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const std::uint16_t len = r.u16();
    nt.name = r.string(len);
    const std::int64_t rank_at = r.offset();
    const std::uint8_t rank = r.u8();
    if (rank > Shape::kMaxRank) {
      throw DataError(path.string() + ": tensor '" + nt.name + "' has rank " + std::to_string(rank), rank_at);
    }
    std::vector<std::int64_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    Shape shape(dims);
    if (static_cast<std::uint64_t>(shape.numel()) * 4 > r.remaining()) {
      r.fail("truncated data for tensor '" + nt.name + "' of shape " + shape.str(), r.offset());
    }
    std::vector<float> data(static_cast<std::size_t>(shape.numel()));
    for (auto& v : data) v = r.f32();
    nt.tensor = Tensor(shape, std::move(data));
    out.push_back(std::move(nt));
  }
  r.expect_end();
  return out;
}

std::vector<float> encode_arch(const ArchConfig& c) {
  std::vector<float> v{static_cast<float>(kArchVersion),
                       static_cast<float>(c.resolution),
                       static_cast<float>(c.n_classes),
                       static_cast<float>(c.projection),
                       static_cast<float>(c.mlp_ratio),
                       static_cast<float>(c.n_iter),
                       static_cast<float>(static_cast<int>(c.phantom)),
                       static_cast<float>(static_cast<int>(c.pos)),
                       c.ffn_shortcut ? 1.0f : 0.0f,
                       static_cast<float>(c.drop_path)};
  for (const auto* arr : {&c.blocks, &c.channels, &c.heads, &c.grids}) {
    for (int x : *arr) v.push_back(static_cast<float>(x));
  }
  for (int x : c.stem) v.push_back(static_cast<float>(x));
  return v;
}

ArchConfig decode_arch(std::span<const float> v) {
  constexpr std::size_t kLength = 10 + 4 * kStages + kStemConvs;
  if (v.size() != kLength || v[0] != static_cast<float>(kArchVersion)) {
    throw DataError("architecture record has an unexpected layout");
  }
  auto as_int = [&](std::size_t i) { return static_cast<int>(v[i]); };
  ArchConfig c;
  c.name = "checkpoint";
  c.resolution = as_int(1);
  c.n_classes = as_int(2);
  c.projection = as_int(3);
  c.mlp_ratio = as_int(4);
  c.n_iter = as_int(5);
  c.phantom = as_int(6) == 0 ? PhantomMode::kLiteral : PhantomMode::kMasked;
  if (as_int(7) < 0 || as_int(7) > 2) throw DataError("architecture record has an unknown position encoding");
  c.pos = static_cast<PosEncoding>(as_int(7));
  c.ffn_shortcut = v[8] != 0.0f;
  c.drop_path = v[9];
  std::size_t at = 10;
  for (auto* arr : {&c.blocks, &c.channels, &c.heads, &c.grids}) {
    for (int& x : *arr) x = as_int(at++);
  }
  for (int& x : c.stem) x = as_int(at++);
  return c;
}

void save_model(const std::filesystem::path& path, SvitModel& model) {
  std::vector<NamedTensor> all;
  const auto arch = encode_arch(model.cfg);
  all.push_back({kArchMetaName, Tensor(Shape{static_cast<std::int64_t>(arch.size())}, arch)});
  model.visit([&](const std::string& name, Tensor& t, TensorRole) { all.push_back({name, t}); });
  write_tensors(path, all);
}

SvitModel load_model(const std::filesystem::path& path) {
  auto tensors = read_tensors(path);
  std::map<std::string, Tensor> by_name;
  for (auto& nt : tensors) by_name.emplace(nt.name, nt.tensor);
  auto meta = by_name.find(kArchMetaName);
  if (meta == by_name.end()) throw DataError(path.string() + ": no '" + kArchMetaName + "' record");
  ArchConfig cfg = decode_arch(meta->second.data());
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": stored architecture is invalid: " + e.what());
  }
  by_name.erase(meta);
  SvitModel model = SvitModel::build(cfg, 0);
  model.visit([&](const std::string& name, Tensor& t, TensorRole) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError(path.string() + ": missing tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw DataError(path.string() + ": tensor '" + name + "' has shape " + it->second.shape().str() +
                      ", expected " + t.shape().str());
    }
    t = it->second;
    by_name.erase(it);
  });
  if (!by_name.empty()) throw DataError(path.string() + ": unexpected tensor '" + by_name.begin()->first + "'");
  return model;
}

}  // namespace stt
