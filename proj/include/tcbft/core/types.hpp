#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tcbft {

using ReplicaId = std::uint32_t;
using ClientId = std::uint32_t;
using View = std::uint64_t;
using Seq = std::uint64_t;
using TimeNs = std::int64_t;

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

constexpr TimeNs kMillisecond = 1'000'000;

/// 32-byte SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  bool is_zero() const;
  std::string hex() const;
  std::string short_hex() const { return hex().substr(0, 12); }
};

std::string to_hex(ByteView data);

}  // namespace tcbft
