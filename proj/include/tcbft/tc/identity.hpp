#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tcbft/core/crypto.hpp"
#include "tcbft/core/types.hpp"

namespace tcbft::tc {

enum class CertMode : std::uint8_t { hmac = 1, sig = 2 };

/// strict: counter identities are fixed per (replica, purpose).
/// vulnerable: the TC mints fresh counters on request and nobody pins them.
enum class CounterPolicy : std::uint8_t { strict = 1, vulnerable = 2 };

enum class Phase : std::uint8_t { prepare = 1, commit = 2, checkpoint = 3, view_change = 4, new_view = 5 };

std::string_view to_string(CertMode m);
std::string_view to_string(CounterPolicy p);
std::string_view to_string(Phase p);

enum class TcErrc {
  unavailable,
  window_exceeded,
  equivocation_refused,
  out_of_order,
  mode_violation,
  restore_refused,
  unknown_counter,
  invalid_argument,
};

std::string_view to_string(TcErrc e);

class TcError : public std::runtime_error {
 public:
  TcError(TcErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  TcErrc code() const { return code_; }

 private:
  TcErrc code_;
};

struct TcIdentity {
  ReplicaId replica = 0;
  std::uint64_t epoch = 0;  // bumped on every fresh instantiation

  auto operator<=>(const TcIdentity&) const = default;
};

struct CounterId {
  std::uint64_t name = 0;

  auto operator<=>(const CounterId&) const = default;

  static CounterId derived(ReplicaId replica, std::uint32_t purpose);
  static CounterId usig(ReplicaId replica) { return derived(replica, 1); }
  static CounterId a2m(ReplicaId replica) { return derived(replica, 2); }
  static CounterId for_phase(ReplicaId replica, Phase phase) {
    return derived(replica, 0x100u + static_cast<std::uint32_t>(phase));
  }
};

/// Statically defined certificate id used in prevention mode.
struct ContextId {
  Phase phase = Phase::prepare;
  View view = 0;
  Seq seq = 0;

  auto operator<=>(const ContextId&) const = default;
};

struct UniqueIdentifier {
  TcIdentity tc;
  CounterId counter;
  std::uint64_t value = 0;
  Digest msg_hash;
  std::optional<ContextId> context;
  Bytes cert;
  CertMode mode = CertMode::sig;
};

/// Canonical byte layout covered by a certificate.
Bytes certified_payload(const UniqueIdentifier& ui);

/// Counter position. USIG counters use view 0 and value = next value;
/// per-phase counters use (view, next seq).
struct Position {
  View view = 0;
  std::uint64_t value = 0;

  auto operator<=>(const Position&) const = default;
};

/// Proof that every position p with from <= p < to was voided.
struct SkipAttestation {
  TcIdentity tc;
  CounterId counter;
  Position from;
  Position to;
  std::uint64_t highest_certified = 0;
  Bytes cert;
  CertMode mode = CertMode::sig;

  bool voids(Position p) const { return from <= p && p < to; }
};

Bytes certified_payload(const SkipAttestation& skip);

/// Secret injected by the administrator at deployment.
struct Provisioning {
  crypto::MacKey shared_key{};  // HMAC mode
  Digest signing_seed;          // SIG mode, per TC instance
};

enum class VerifyStatus { valid, invalid, stale_epoch, unknown_replica };

std::string_view to_string(VerifyStatus s);

/// Public deployment information: which TC epoch is registered for each
/// replica and, in SIG mode, its verification key.
struct TcDirectory {
  struct Entry {
    std::uint64_t epoch = 0;
    crypto::PublicKey pub;
  };

  CertMode mode = CertMode::sig;
  std::vector<Entry> entries;

  const Entry* find(ReplicaId replica) const {
    return replica < entries.size() ? &entries[replica] : nullptr;
  }
};

}  // namespace tcbft::tc
