// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/embedding_io.hpp"

namespace lixp::detail {

// Little-endian writer/reader shared by the embedding and checkpoint formats.

class ByteWriter {
 public:
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string format)
      : bytes_(bytes), format_(std::move(format)) {}

  [[nodiscard]] std::size_t offset() const noexcept { return pos_; }
  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  [[nodiscard]] bool at_end() const noexcept { return pos_ == bytes_.size(); }

  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw FormatError(format_ + ": truncated while reading " + std::string(what) + " at offset " +
                        std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, have " +
                        std::to_string(remaining()) + ")");
    }
  }
  [[nodiscard]] bool peek(std::string_view magic) const {
    return remaining() >= magic.size() &&
           std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) == 0;
  }
  void expect(std::string_view magic, std::string_view what) {
    need(magic.size(), what);
    if (!peek(magic)) {
      throw FormatError(format_ + ": bad " + std::string(what) + " at offset " + std::to_string(pos_) +
                        " (expected \"" + std::string(magic) + "\")");
    }
    pos_ += magic.size();
  }
  std::string raw(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(std::string_view what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(std::string_view what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32(std::string_view what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }
  double f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(format_ + ": " + msg + " at offset " + std::to_string(pos_));
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

}  // namespace lixp::detail
