#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "vsret/error.hpp"

namespace vsret::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian primitives to a byte buffer.
class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f32s(const float* p, std::size_t n) { raw(p, n * sizeof(float)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  [[nodiscard]] const std::string& buffer() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

/// Bounds-checked cursor over a byte buffer; errors carry the byte offset.
class Reader {
 public:
  Reader(std::string_view data, std::string context) : data_(data), context_(std::move(context)) {}

  std::string_view bytes(std::size_t n) {
    need(n, "bytes");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v, "u32");
    return v;
  }
  float f32() {
    float v;
    raw(&v, sizeof v, "f32");
    return v;
  }
  void f32s(float* p, std::size_t n) { raw(p, n * sizeof(float), "f32 payload"); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
  }
  void expect_magic(std::string_view magic) {
    const std::size_t at = pos_;
    if (bytes(magic.size()) != magic) fail(at, "bad magic, expected \"" + std::string(magic) + "\"");
  }
  [[nodiscard]] std::size_t offset() const { return pos_; }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw FormatError(context_ + ": " + what + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > remaining()) {
      fail(pos_, std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, have " +
                     std::to_string(remaining()) + ")");
    }
  }
  void raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view data_;
  std::string context_;
  std::size_t pos_ = 0;
};

}  // namespace vsret::io
