#pragma once

#include <cstdint>
#include <set>

#include "tcbft/tc/a2m_log.hpp"
#include "tcbft/tc/trusted_component.hpp"

namespace tcbft::tc {

/// Sealed export of a component's counters and secret.
struct SnapshotBlob {
  TcIdentity source;
  Digest id;
  Bytes sealed;
};

/// Deployment administrator. Holds the system secret, provisions fresh
/// components, maintains the public directory and runs the snapshot path.
class AdminConsole {
 public:
  AdminConsole(const Digest& system_seed, CertMode mode, std::size_t replicas);

  const TcDirectory& directory() const { return directory_; }

  /// Fresh component for `replica` at `epoch`, provisioned with its secret.
  /// `register_identity` publishes it in the directory (initial deployment);
  /// a restart without restore leaves the directory untouched.
  TrustedComponent deploy(const TcOptions& options, std::uint64_t epoch, bool register_identity);

  /// Tamper-evident log owned by `replica`.
  A2mLog deploy_log(ReplicaId replica, std::uint64_t window);

  /// Quiesce `tc`, seal its state and stop it.
  SnapshotBlob snapshot(TrustedComponent& tc);

  /// Reinstall `blob` into a component that never issued a certificate.
  /// The target continues the snapshot's timeline. Each blob is single use.
  void restore(TrustedComponent& target, const SnapshotBlob& blob);

 private:
  Provisioning provisioning_for(ReplicaId replica, std::uint64_t epoch) const;

  Digest seed_;
  crypto::MacKey shared_key_{};
  crypto::MacKey sealing_key_{};
  TcDirectory directory_;
  std::set<Digest> used_blobs_;
  std::uint64_t snapshots_ = 0;
};

}  // namespace tcbft::tc
