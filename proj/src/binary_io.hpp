// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian byte encoding shared by the dataset and checkpoint formats.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "sbr/error.hpp"

namespace sbr::detail {

template <class U>
void put_le(std::vector<char>& buf, U bits) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { put_le(buf_, v); }
  void f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

  const std::vector<char>& bytes() const { return buf_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed for " + path.string());
  }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  static ByteReader load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes));
  }

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return buf_.size() - pos_; }

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::string_view(buf_.data() + pos_, m.size()) != m) {
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"", pos_);
    }
    pos_ += m.size();
  }

  std::uint32_t u32(const char* what) { return get<std::uint32_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
  double f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  void need(std::uint64_t n, const char* what) const {
    if (n > remaining()) {
      throw FormatError(std::string("truncated file while reading ") + what, pos_);
    }
  }

 private:
  template <class U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::vector<char> buf_;
  std::uint64_t pos_ = 0;
};

}  // namespace sbr::detail
