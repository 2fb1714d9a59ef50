#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "ndup/error.hpp"

namespace ndup::detail {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  template <typename T>
  void scalar(T v) {
    bytes(&v, sizeof(T));
  }
  void u8(std::uint8_t v) { scalar(v); }
  void u16(std::uint16_t v) { scalar(v); }
  void u32(std::uint32_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }
  void f64(double v) { scalar(v); }

  /// Appends CRC32 of everything written so far.
  void crc() { u32(crc32_of(buf_)); }

  std::vector<std::uint8_t> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked cursor; any over-read throws `code`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorCode code) : bytes_(bytes), code_(code) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) fail("truncated at offset " + std::to_string(pos_));
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  double f64() { return scalar<double>(); }

  void expect_magic(std::string_view m) {
    if (remaining() < m.size() || std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
      fail("bad magic (expected " + std::string(m) + ")");
    }
    pos_ += m.size();
  }

  /// Verifies the trailing CRC32 over everything before it and shrinks the
  /// readable range to exclude it.
  void verify_trailing_crc() {
    if (bytes_.size() < 4) fail("too short for checksum");
    const std::size_t body = bytes_.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes_.data() + body, 4);
    if (crc32_of(bytes_.first(body)) != stored) fail("checksum mismatch");
    bytes_ = bytes_.first(body);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const { throw Error(code_, what); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorCode code_;
};

}  // namespace ndup::detail
