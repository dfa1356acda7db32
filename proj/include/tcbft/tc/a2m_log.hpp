#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "tcbft/tc/identity.hpp"

namespace tcbft::tc {

class AdminConsole;

/// Attested append-only log. Each position holds at most one digest, and
/// positions below the low watermark are forgotten but never reassigned.
class A2mLog {
 public:
  struct Entry {
    std::uint64_t position = 0;
    UniqueIdentifier attestation;
  };

  enum class LookupStatus { found, truncated, unassigned };

  struct Lookup {
    LookupStatus status = LookupStatus::unassigned;
    std::optional<UniqueIdentifier> attestation;
  };

  Entry append(const Digest& msg_hash);
  Lookup lookup(std::uint64_t position) const;
  void truncate(std::uint64_t new_low);

  std::uint64_t low_watermark() const { return low_; }
  std::uint64_t next_position() const { return next_; }
  TcIdentity identity() const { return identity_; }

 private:
  friend class AdminConsole;

  A2mLog(TcIdentity identity, CertMode mode, const Provisioning& secret, std::uint64_t window);

  TcIdentity identity_;
  CertMode mode_;
  Provisioning secret_;
  crypto::SigningKey signing_key_;
  std::uint64_t window_;
  std::uint64_t low_ = 0;
  std::uint64_t next_ = 1;
  std::map<std::uint64_t, UniqueIdentifier> entries_;
};

class TrustedComponent;

/// Verification of an A2M attestation for `position` and `msg_hash`.
VerifyStatus verify_log_entry(const UniqueIdentifier& attestation, std::uint64_t position,
                              const Digest& msg_hash, const TcDirectory& directory, TrustedComponent& own);

}  // namespace tcbft::tc
