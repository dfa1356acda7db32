#include "tcbft/core/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace tcbft::crypto {

void ensure_init() {
  static const bool ok = [] { return sodium_init() >= 0; }();
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

Digest sha256(ByteView data) {
  ensure_init();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

Digest sha256(std::string_view text) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Digest derive(std::string_view label, ByteView seed) {
  ensure_init();
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(label.data()), label.size());
  crypto_hash_sha256_update(&st, seed.data(), seed.size());
  Digest d;
  crypto_hash_sha256_final(&st, d.bytes.data());
  return d;
}

Mac hmac_sha256(const MacKey& key, ByteView data) {
  ensure_init();
  Mac mac;
  crypto_auth_hmacsha256(mac.data(), data.data(), data.size(), key.data());
  return mac;
}

bool hmac_verify(const MacKey& key, ByteView data, ByteView mac) {
  ensure_init();
  if (mac.size() != crypto_auth_hmacsha256_BYTES) return false;
  return crypto_auth_hmacsha256_verify(mac.data(), data.data(), data.size(), key.data()) == 0;
}

KeyPair keypair_from_seed(const Digest& seed) {
  ensure_init();
  KeyPair kp;
  crypto_sign_seed_keypair(kp.pub.bytes.data(), kp.secret.bytes.data(), seed.bytes.data());
  return kp;
}

Bytes sign(const SigningKey& key, ByteView data) {
  ensure_init();
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, data.data(), data.size(), key.bytes.data());
  return sig;
}

bool verify(const PublicKey& key, ByteView data, ByteView signature) {
  ensure_init();
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), data.data(), data.size(), key.bytes.data()) == 0;
}

Bytes seal(const MacKey& key, const Digest& nonce_seed, ByteView plain) {
  ensure_init();
  Bytes out(plain.size() + crypto_secretbox_MACBYTES);
  crypto_secretbox_easy(out.data(), plain.data(), plain.size(), nonce_seed.bytes.data(), key.data());
  return out;
}

bool unseal(const MacKey& key, const Digest& nonce_seed, ByteView sealed, Bytes& plain) {
  ensure_init();
  if (sealed.size() < crypto_secretbox_MACBYTES) return false;
  plain.resize(sealed.size() - crypto_secretbox_MACBYTES);
  return crypto_secretbox_open_easy(plain.data(), sealed.data(), sealed.size(), nonce_seed.bytes.data(),
                                    key.data()) == 0;
}

}  // namespace tcbft::crypto
