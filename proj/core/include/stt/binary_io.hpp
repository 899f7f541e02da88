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

// Little-endian byte encoding shared by the weight and dataset formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "stt/error.hpp"

namespace stt {

// Whole file as bytes; DataError naming the path when unreadable.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  void save(const std::filesystem::path& path) const { write_file(path, buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; every failure is a DataError carrying the offset.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

  std::int64_t offset() const { return static_cast<std::int64_t>(pos_); }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  const std::uint8_t* take(std::size_t n) {
    need(n);
    const auto* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  void expect_magic(const char (&magic)[4]) {
    need(4);
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
      throw DataError(source_ + ": bad magic, expected '" + std::string(magic, 4) + "'", offset());
    }
    pos_ += 4;
  }
  void expect_end() const {
    if (pos_ != data_.size()) {
      throw DataError(source_ + ": " + std::to_string(remaining()) + " trailing bytes", offset());
    }
  }
  [[noreturn]] void fail(const std::string& what, std::int64_t at) const {
    throw DataError(source_ + ": " + what, at);
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw DataError(source_ + ": truncated, needed " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + " but only " + std::to_string(remaining()) + " remain",
                      offset());
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::vector<std::uint8_t> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace stt
