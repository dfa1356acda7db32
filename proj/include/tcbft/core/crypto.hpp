#pragma once

#include <array>
#include <string_view>

#include "tcbft/core/types.hpp"

// Thin wrappers over libsodium. All key material is derived deterministically
// from seeds so that simulation runs are reproducible.
namespace tcbft::crypto {

void ensure_init();

Digest sha256(ByteView data);
Digest sha256(std::string_view text);

/// Domain-separated derivation: sha256(label || seed).
Digest derive(std::string_view label, ByteView seed);

using MacKey = std::array<std::uint8_t, 32>;
using Mac = std::array<std::uint8_t, 32>;

Mac hmac_sha256(const MacKey& key, ByteView data);
bool hmac_verify(const MacKey& key, ByteView data, ByteView mac);

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const PublicKey&) const = default;
};

struct SigningKey {
  std::array<std::uint8_t, 64> bytes{};
};

struct KeyPair {
  PublicKey pub;
  SigningKey secret;
};

KeyPair keypair_from_seed(const Digest& seed);
Bytes sign(const SigningKey& key, ByteView data);
bool verify(const PublicKey& key, ByteView data, ByteView signature);

/// Authenticated symmetric encryption used for sealed snapshots.
Bytes seal(const MacKey& key, const Digest& nonce_seed, ByteView plain);
bool unseal(const MacKey& key, const Digest& nonce_seed, ByteView sealed, Bytes& plain);

}  // namespace tcbft::crypto
