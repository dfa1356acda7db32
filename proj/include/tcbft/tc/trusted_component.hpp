#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "tcbft/tc/identity.hpp"

namespace tcbft::sim {
class TcBank;
}

namespace tcbft::tc {

class AdminConsole;

struct TcOptions {
  ReplicaId replica = 0;
  CertMode mode = CertMode::sig;
  CounterPolicy policy = CounterPolicy::strict;
  std::uint64_t window = 1u << 20;  // width W of the watermark window
};

/// Simulated trusted component. Key material and counter state live only
/// inside this object; the replica reaches them through the certify, skip
/// and verify operations below and nothing else. Copies are reserved for
/// the simulator's state exploration.
class TrustedComponent {
 public:
  TrustedComponent(TcOptions options, std::uint64_t epoch);

  TrustedComponent(TrustedComponent&&) noexcept = default;
  TrustedComponent& operator=(TrustedComponent&&) noexcept = default;
  TrustedComponent& operator=(const TrustedComponent&) = delete;

  TcIdentity identity() const { return identity_; }
  CertMode mode() const { return options_.mode; }
  CounterPolicy policy() const { return options_.policy; }
  std::uint64_t window() const { return options_.window; }
  std::uint64_t window_low() const { return window_low_; }
  bool alive() const { return alive_; }
  bool initialized() const { return initialized_; }

  /// Detection mode: certify msg_hash with the next value of the replica's
  /// own sequential counter.
  UniqueIdentifier create_ui(const Digest& msg_hash);
  /// Same, on a counter obtained from create_counter (vulnerable policy).
  UniqueIdentifier create_ui(CounterId counter, const Digest& msg_hash);
  /// Void the next `count` values of the sequential counter.
  SkipAttestation skip(std::uint64_t count);

  /// Prevention mode: certify msg_hash under a predefined context. The
  /// per-phase sequence advances by exactly one; the view may only grow.
  /// Starting a higher view at a lower sequence number requires skip_to.
  UniqueIdentifier certify(const ContextId& context, const Digest& msg_hash);
  /// Move a phase counter forward to (view, start_seq), voiding everything
  /// in between.
  SkipAttestation skip_to(Phase phase, View view, Seq start_seq);

  /// Mint a fresh counter. Only available under the vulnerable policy.
  CounterId create_counter();

  /// Slide the watermark window. Positions up to low + window are usable.
  void advance_window(std::uint64_t low);

  /// HMAC-mode check using the shared key held inside this component.
  bool check_mac(ByteView payload, ByteView mac);

  /// Stop the component. Every later call fails with TcErrc::unavailable.
  void crash() { alive_ = false; }

  std::uint64_t access_count() const { return accesses_; }
  std::uint64_t certificate_count() const { return issued_.size(); }
  /// Public audit trail of every certificate this instance produced.
  const std::vector<UniqueIdentifier>& issued() const { return issued_; }

 private:
  friend class AdminConsole;
  friend class sim::TcBank;

  struct CounterState {
    Position next{0, 1};
    std::uint64_t highest = 0;
  };

  TrustedComponent(const TrustedComponent&) = default;

  void require_usable(const char* op);
  CounterState& counter(CounterId id);
  UniqueIdentifier issue(CounterId counter, std::uint64_t value, const Digest& msg_hash,
                         std::optional<ContextId> context);
  SkipAttestation attest_skip(CounterId counter, Position from, Position to, std::uint64_t highest);
  Bytes authenticate(const Bytes& payload) const;
  void install(const Provisioning& secret);

  TcOptions options_;
  TcIdentity identity_;
  Provisioning secret_;
  crypto::SigningKey signing_key_;
  std::map<CounterId, CounterState> counters_;
  std::uint64_t created_counters_ = 0;
  std::uint64_t window_low_ = 0;
  std::uint64_t accesses_ = 0;
  bool alive_ = true;
  bool initialized_ = false;
  std::vector<UniqueIdentifier> issued_;
};

/// Verify a UI. SIG mode checks the signature against the directory and
/// never touches `own`; HMAC mode consults the verifier's own component.
VerifyStatus verify(const UniqueIdentifier& ui, const Digest& msg_hash, const TcDirectory& directory,
                    TrustedComponent& own);
VerifyStatus verify(const SkipAttestation& skip, const TcDirectory& directory, TrustedComponent& own);

}  // namespace tcbft::tc
