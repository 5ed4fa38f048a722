#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crlmesh {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Raised when an encoded message is truncated or otherwise malformed.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Big-endian appender used by every canonical encoding in the project.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void raw(ByteView bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  Bytes out_;
};

/// Big-endian cursor over an immutable buffer; every read is bounds-checked.
class ByteReader {
 public:
  explicit ByteReader(ByteView in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint16_t u16() {
    auto b = need(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  std::uint32_t u32() {
    auto b = need(4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
  }
  ByteView raw(std::size_t n) { return need(n); }

  template <std::size_t N>
  void copy_into(std::array<std::uint8_t, N>& dst) {
    auto b = need(N);
    std::copy(b.begin(), b.end(), dst.begin());
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void expect_end(const char* what) const {
    if (remaining() != 0) throw DecodeError(std::string(what) + ": trailing bytes");
  }

 private:
  ByteView need(std::size_t n) {
    if (remaining() < n) throw DecodeError("truncated input");
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

std::string to_hex(ByteView bytes);
Bytes from_hex(const std::string& hex);

}  // namespace crlmesh
