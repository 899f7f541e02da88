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

#include "stt/tools/image_io.hpp"

#include <cctype>
#include <string>

#include "stt/binary_io.hpp"

namespace stt {

namespace {

class HeaderParser {
 public:
  HeaderParser(const std::vector<std::uint8_t>& bytes, const std::string& source) : b_(bytes), source_(source) {}

  // Next decimal field, skipping whitespace and '#' comments.
  int number(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1'000'000) fail(std::string(what) + " is too large", start);
    }
    if (pos_ == start) fail(std::string("expected ") + what, start);
    return static_cast<int>(v);
  }
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  // Exactly one whitespace byte separates the header from the raster.
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) fail("expected whitespace before pixel data", pos_);
    ++pos_;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw DataError(source_ + ": " + what, static_cast<std::int64_t>(at));
  }

 private:
  const std::vector<std::uint8_t>& b_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  HeaderParser h(bytes, source);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    h.fail("not a binary PPM (P6) or PGM (P5) file", 0);
  }
  Image img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  h.seek(2);
  const std::size_t width_at = h.pos();
  img.width = h.number("width");
  img.height = h.number("height");
  if (img.width == 0 || img.height == 0) h.fail("empty image", width_at);
  const std::size_t maxval_at = h.pos();
  const int maxval = h.number("maxval");
  if (maxval < 1 || maxval > 255) h.fail("maxval " + std::to_string(maxval) + " is not in [1, 255]", maxval_at);
  h.single_space();
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (bytes.size() - h.pos() < need) {
    h.fail("truncated pixel data: need " + std::to_string(need) + " bytes, have " +
               std::to_string(bytes.size() - h.pos()),
           bytes.size());
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.pos()),
                    bytes.begin() + static_cast<std::ptrdiff_t>(h.pos() + need));
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::min(255, p * 255 / maxval));
  }
  return img;
}

Image read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file(path), path.string()); }

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError("only 1- or 3-channel images can be written");
  write_file(path, encode_pnm(image));
}

Tensor image_to_input(const Image& image, int size) {
  if (image.channels != 3) throw DataError("expected an RGB (P6) image");
  const bool down = image.width >= size;
  const int factor = down ? image.width / size : size / image.width;
  const bool exact = image.width == image.height && factor >= 1 &&
                     (down ? image.width == factor * size : size == factor * image.width);
  if (!exact) {
    throw DataError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    "; the model needs " + std::to_string(size) + "x" + std::to_string(size) +
                    " or a square image an exact integer factor away");
  }
  std::vector<float> v(static_cast<std::size_t>(3) * size * size);
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        if (down) {
          for (int dy = 0; dy < factor; ++dy)
            for (int dx = 0; dx < factor; ++dx) acc += image.at(y * factor + dy, x * factor + dx, c);
          acc /= factor * factor;
        } else {
          acc = image.at(y / factor, x / factor, c);
        }
        v[c * plane + static_cast<std::size_t>(y) * size + x] = static_cast<float>(acc / 255.0);
      }
    }
  }
  return Tensor(Shape{1, 3, size, size}, std::move(v));
}

Image upscale(const Image& image, int factor) {
  Image out;
  out.width = image.width * factor;
  out.height = image.height * factor;
  out.channels = image.channels;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < out.channels; ++c) {
        out.pixels[(static_cast<std::size_t>(y) * out.width + x) * out.channels + c] = image.at(y / factor, x / factor, c);
      }
  return out;
}

}  // namespace stt
