#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtjit/support/error.hpp"

namespace mtjit {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::uint64_t fnv1a64(ByteView data);
std::uint32_t fnv1a32(ByteView data);

/// Little-endian, fixed-width encoder. Strings are u32-length-prefixed.
class ByteWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v);
  void str(std::string_view s);
  void raw(ByteView b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void pad_to(std::size_t alignment);

  std::size_t size() const { return buf_.size(); }
  Bytes &bytes() { return buf_; }
  Bytes take() { return std::move(buf_); }

  /// Overwrite a previously written u32/u64 slot.
  void patch_u32(std::size_t at, std::uint32_t v);
  void patch_u64(std::size_t at, std::uint64_t v);

private:
  void put(std::uint64_t v, int n);
  Bytes buf_;
};

/// Bounds-checked decoder; every overrun throws FormatError.
class ByteReader {
public:
  explicit ByteReader(ByteView data, std::string what = "payload")
      : data_(data), what_(std::move(what)) {}

  std::uint8_t u8();
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64();
  std::string str();
  ByteView raw(std::size_t n);
  /// Reads a u32 element count and rejects counts that cannot fit in the
  /// remaining bytes given a minimum encoded element size.
  std::uint32_t count(std::size_t min_element_bytes = 1);

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const;
  [[noreturn]] void fail(const std::string &msg) const;

private:
  std::uint64_t get(int n);
  ByteView data_;
  std::size_t pos_ = 0;
  std::string what_;
};

} // namespace mtjit
