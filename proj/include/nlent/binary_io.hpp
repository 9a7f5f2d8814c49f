/*
 * Copyright 2026 The nlent Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Byte-order explicit encoding helpers shared by the file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "nlent/errors.hpp"

namespace nlent::io {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

/// Writes to a sibling temp file then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path.string() + "'");
  }
}

/// Bounds-checked cursor over an in-memory file. Any overrun throws
/// FormatError naming the file and the field being read.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

  std::span<const std::uint8_t> take(std::size_t count, std::string_view what) {
    if (count > remaining()) {
      throw FormatError(source_ + ": truncated while reading " + std::string(what) + " (need " +
                        std::to_string(count) + " bytes at offset " + std::to_string(pos_) +
                        ", have " + std::to_string(remaining()) + ")");
    }
    auto out = bytes_.subspan(pos_, count);
    pos_ += count;
    return out;
  }

  template <typename T>
  T le(std::string_view what) {
    return decode<T>(take(sizeof(T), what), /*big_endian=*/false);
  }
  template <typename T>
  T be(std::string_view what) {
    return decode<T>(take(sizeof(T), what), /*big_endian=*/true);
  }

  const std::string& source() const noexcept { return source_; }

 private:
  template <typename T>
  static T decode(std::span<const std::uint8_t> b, bool big_endian) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    U v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const std::size_t idx = big_endian ? i : sizeof(T) - 1 - i;
      v = static_cast<U>((v << 8) | b[idx]);
    }
    return std::bit_cast<T>(v);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

class Writer {
 public:
  template <typename T>
  void le(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const auto v = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  template <typename T>
  void be(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const auto v = std::bit_cast<U>(value);
    for (std::size_t i = sizeof(T); i-- > 0;) {
      buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  void bytes(std::string_view raw) { buffer_.append(raw); }
  void byte(std::uint8_t b) { buffer_.push_back(static_cast<char>(b)); }

  const std::string& buffer() const noexcept { return buffer_; }

 private:
  std::string buffer_;
};

}  // namespace nlent::io
