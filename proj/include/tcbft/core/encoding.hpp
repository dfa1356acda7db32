#pragma once

#include <stdexcept>
#include <string_view>

#include "tcbft/core/types.hpp"

namespace tcbft {

/// Canonical byte encoding: fixed-order fields, little-endian integers,
/// variable-length fields carry a u32 length prefix.
class Encoder {
 public:
  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& digest(const Digest& d);
  Encoder& bytes(ByteView b);
  Encoder& str(std::string_view s);

  const Bytes& data() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  Digest hash() const;

 private:
  Bytes buf_;
};

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Decoder {
 public:
  explicit Decoder(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  Digest digest();
  Bytes bytes();
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace tcbft
