#include "mtjit/support/bytes.hpp"

#include <bit>
#include <cstring>

namespace mtjit {

std::uint64_t fnv1a64(ByteView data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t fnv1a32(ByteView data) {
  std::uint32_t h = 0x811c9dc5U;
  for (auto b : data) {
    h ^= b;
    h *= 0x01000193U;
  }
  return h;
}

void ByteWriter::put(std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i)
    buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::pad_to(std::size_t alignment) {
  while (buf_.size() % alignment != 0)
    buf_.push_back(0);
}

void ByteWriter::patch_u32(std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf_[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void ByteWriter::patch_u64(std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf_[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void ByteReader::fail(const std::string &msg) const {
  throw FormatError(what_ + ": " + msg + " at byte " + std::to_string(pos_));
}

std::uint8_t ByteReader::u8() {
  if (remaining() < 1)
    fail("truncated");
  return data_[pos_++];
}

std::uint64_t ByteReader::get(int n) {
  if (remaining() < static_cast<std::size_t>(n))
    fail("truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i)
    v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += n;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  auto n = u32();
  if (remaining() < n)
    fail("truncated string");
  std::string s(reinterpret_cast<const char *>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

ByteView ByteReader::raw(std::size_t n) {
  if (remaining() < n)
    fail("truncated");
  auto v = data_.subspan(pos_, n);
  pos_ += n;
  return v;
}

std::uint32_t ByteReader::count(std::size_t min_element_bytes) {
  auto n = u32();
  if (min_element_bytes > 0 && static_cast<std::uint64_t>(n) * min_element_bytes > remaining())
    fail("element count " + std::to_string(n) + " exceeds payload");
  return n;
}

void ByteReader::expect_end() const {
  if (!at_end())
    fail("trailing bytes");
}

} // namespace mtjit
