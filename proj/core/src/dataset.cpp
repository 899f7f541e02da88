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

#include "stt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stt/binary_io.hpp"
#include "stt/random.hpp"

namespace stt {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Dim noisy background with one bright disc inside the class's region.
void render_blob(const SyntheticDatasetSpec& s, int label, Rng& rng, std::span<std::uint8_t> out) {
  const int side = regions_per_side(s.n_classes);
  const double rh = static_cast<double>(s.height) / side, rw = static_cast<double>(s.width) / side;
  const double radius = 0.45 * std::min(rh, rw) * rng.uniform(0.9, 1.05);
  const double cy = (label / side + 0.5) * rh + rng.uniform(-0.08, 0.08) * rh;
  const double cx = (label % side + 0.5) * rw + rng.uniform(-0.08, 0.08) * rw;
  std::vector<double> colour(static_cast<std::size_t>(s.channels));
  for (auto& c : colour) c = rng.uniform(0.75, 1.0);
  const double base = rng.uniform(0.05, 0.2);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
      const double inside = std::clamp(radius + 0.5 - d, 0.0, 1.0);  // one-pixel soft edge
      for (int c = 0; c < s.channels; ++c) {
        const double v = base + rng.uniform(-0.05, 0.05);
        out[(static_cast<std::size_t>(y) * s.width + x) * s.channels + c] = to_byte(v + inside * (colour[c] - v));
      }
    }
  }
}

// Sinusoidal stripes whose orientation encodes the class.
void render_stripes(const SyntheticDatasetSpec& s, int label, Rng& rng, std::span<std::uint8_t> out) {
  const double angle = std::numbers::pi * label / s.n_classes + rng.uniform(-0.1, 0.1);
  const double period = rng.uniform(4.0, 7.0), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ky = std::sin(angle) * 2.0 * std::numbers::pi / period;
  const double kx = std::cos(angle) * 2.0 * std::numbers::pi / period;
  std::vector<double> colour(static_cast<std::size_t>(s.channels));
  for (auto& c : colour) c = rng.uniform(0.5, 1.0);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double wave = 0.5 + 0.4 * std::sin(ky * y + kx * x + phase);
      for (int c = 0; c < s.channels; ++c) {
        out[(static_cast<std::size_t>(y) * s.width + x) * s.channels + c] =
            to_byte(wave * colour[c] + rng.uniform(-0.05, 0.05));
      }
    }
  }
}

}  // namespace

std::string to_string(DatasetKind kind) {
  return kind == DatasetKind::kQuadrantBlobs ? "quadrant-blobs" : "striped-textures";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "quadrant-blobs") return DatasetKind::kQuadrantBlobs;
  if (text == "striped-textures") return DatasetKind::kStripedTextures;
  throw ConfigError("unknown dataset kind '" + text + "' (expected quadrant-blobs or striped-textures)");
}

int regions_per_side(int n_classes) {
  int side = 1;
  while (side * side < n_classes) ++side;
  return side;
}

void SyntheticDatasetSpec::validate() const {
  if (n_classes < 2 || n_classes > 10) throw ConfigError("n_classes must be in [2, 10]");
  if (height < 4 || width < 4 || height > 0xffff || width > 0xffff) throw ConfigError("image size out of range");
  if (channels < 1 || channels > 255) throw ConfigError("channels must be in [1, 255]");
  if (samples_per_class < 1) throw ConfigError("samples per class must be positive");
  if (static_cast<std::uint64_t>(samples_per_class) * n_classes > 0xffffffffu) {
    throw ConfigError("too many samples");
  }
}

Dataset gen_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  Dataset d;
  d.height = spec.height;
  d.width = spec.width;
  d.channels = spec.channels;
  d.n_classes = spec.n_classes;
  const std::int64_t n = static_cast<std::int64_t>(spec.samples_per_class) * spec.n_classes;
  const auto bytes = d.sample_bytes();
  d.labels.resize(static_cast<std::size_t>(n));
  d.pixels.resize(static_cast<std::size_t>(n * bytes));
  for (std::int64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % spec.n_classes);
    d.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(label);
    Rng rng = Rng::derive(spec.seed, spec.first_index + static_cast<std::uint64_t>(i));
    std::span<std::uint8_t> out(d.pixels.data() + i * bytes, static_cast<std::size_t>(bytes));
    if (spec.kind == DatasetKind::kQuadrantBlobs) {
      render_blob(spec, label, rng, out);
    } else {
      render_stripes(spec, label, rng, out);
    }
  }
  return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(d.size()));
  w.u16(static_cast<std::uint16_t>(d.height));
  w.u16(static_cast<std::uint16_t>(d.width));
  w.u8(static_cast<std::uint8_t>(d.channels));
  w.u8(static_cast<std::uint8_t>(d.n_classes));
  const auto bytes = static_cast<std::size_t>(d.sample_bytes());
  for (std::int64_t i = 0; i < d.size(); ++i) {
    w.u8(d.labels[static_cast<std::size_t>(i)]);
    w.bytes(d.pixels.data() + static_cast<std::size_t>(i) * bytes, bytes);
  }
  w.save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kMagic);
  const auto version = r.u16();
  if (version != kVersion) r.fail("unsupported dataset version " + std::to_string(version), r.offset() - 2);
  Dataset d;
  const std::uint32_t n = r.u32();
  d.height = r.u16();
  d.width = r.u16();
  d.channels = r.u8();
  const std::int64_t classes_at = r.offset();
  d.n_classes = r.u8();
  if (d.height == 0 || d.width == 0 || d.channels == 0) r.fail("empty image geometry", classes_at - 5);
  if (d.n_classes < 2) r.fail("n_classes must be at least 2", classes_at);
  const auto bytes = static_cast<std::uint64_t>(d.sample_bytes());
  if (static_cast<std::uint64_t>(n) * (bytes + 1) > r.remaining()) {
    r.fail("truncated: header declares " + std::to_string(n) + " samples of " + std::to_string(bytes + 1) +
               " bytes but only " + std::to_string(r.remaining()) + " remain",
           r.offset() + static_cast<std::int64_t>(r.remaining()));
  }
  d.labels.resize(n);
  d.pixels.resize(static_cast<std::size_t>(n * bytes));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::int64_t at = r.offset();
    d.labels[i] = r.u8();
    if (d.labels[i] >= d.n_classes) {
      r.fail("sample " + std::to_string(i) + " has label " + std::to_string(d.labels[i]) + " >= n_classes", at);
    }
    std::copy_n(r.take(bytes), bytes, d.pixels.data() + i * bytes);
  }
  r.expect_end();
  return d;
}

Tensor image_from_bytes(std::span<const std::uint8_t> pixels, int height, int width, int channels) {
  std::vector<float> v(pixels.size());
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < channels; ++c) v[c * plane + p] = pixels[p * channels + c] / 255.0f;
  }
  return Tensor(Shape{1, channels, height, width}, std::move(v));
}

Tensor Dataset::images(std::span<const std::int64_t> indices) const {
  const auto bytes = static_cast<std::size_t>(sample_bytes());
  std::vector<float> v(indices.size() * bytes);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] < 0 || indices[b] >= size()) throw DimensionError("sample index out of range");
    const auto one = image_from_bytes({pixels.data() + indices[b] * bytes, bytes}, height, width, channels);
    std::copy(one.data().begin(), one.data().end(), v.begin() + static_cast<std::ptrdiff_t>(b * bytes));
  }
  return Tensor(Shape{static_cast<std::int64_t>(indices.size()), channels, height, width}, std::move(v));
}

std::vector<int> Dataset::labels_of(std::span<const std::int64_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(static_cast<std::size_t>(i)));
  return out;
}

}  // namespace stt
