// Copyright 2026 The haren Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian primitives for the binary file formats. Readers track the
// byte offset so format errors can point at the failing field.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "haren/errors.hpp"

namespace haren::binio {

class Writer {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void u32(std::uint32_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<char>& buffer() const { return buf_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!os) throw FormatError("write failed: " + path.string());
  }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }

  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  static Reader open(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
    return Reader(std::move(data), path.string());
  }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
      fail("bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
  }

  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* field) { return get<std::uint32_t>(field); }
  float f32(const char* field) { return std::bit_cast<float>(get<std::uint32_t>(field)); }
  double f64(const char* field) { return std::bit_cast<double>(get<std::uint64_t>(field)); }

  // Guards a bulk payload: `count` elements of `width` bytes must follow.
  void require_payload(std::size_t count, std::size_t width, const char* what) const {
    const std::size_t expected = count * width;
    const std::size_t actual = remaining();
    if (actual < expected) {
      fail(std::string(what) + " truncated: expected " + std::to_string(expected) +
           " bytes, found " + std::to_string(actual));
    }
  }

  void expect_end() const {
    if (remaining() != 0) {
      fail(std::to_string(remaining()) + " trailing bytes after payload");
    }
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + " at byte offset " + std::to_string(pos_) + ": " + msg);
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      fail(std::string("truncated while reading ") + field + " (need " + std::to_string(n) +
           " bytes, have " + std::to_string(remaining()) + ")");
    }
  }

  template <typename U>
  U get(const char* field) {
    need(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::vector<char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace haren::binio
