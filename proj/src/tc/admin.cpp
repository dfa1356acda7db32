#include "tcbft/tc/admin.hpp"

#include "tcbft/core/encoding.hpp"

namespace tcbft::tc {

namespace {

crypto::MacKey key_from(const Digest& d) {
  crypto::MacKey k{};
  std::copy(d.bytes.begin(), d.bytes.end(), k.begin());
  return k;
}

}  // namespace

AdminConsole::AdminConsole(const Digest& system_seed, CertMode mode, std::size_t replicas) : seed_(system_seed) {
  shared_key_ = key_from(crypto::derive("tc-shared-key", seed_.bytes));
  sealing_key_ = key_from(crypto::derive("tc-sealing-key", seed_.bytes));
  directory_.mode = mode;
  directory_.entries.resize(replicas);
}

Provisioning AdminConsole::provisioning_for(ReplicaId replica, std::uint64_t epoch) const {
  Encoder e;
  e.digest(seed_).u32(replica).u64(epoch);
  Provisioning p;
  p.shared_key = shared_key_;
  p.signing_seed = crypto::derive("tc-signing-seed", e.data());
  return p;
}

TrustedComponent AdminConsole::deploy(const TcOptions& options, std::uint64_t epoch, bool register_identity) {
  TrustedComponent tc(options, epoch);
  Provisioning p = provisioning_for(options.replica, epoch);
  tc.install(p);
  if (register_identity) {
    if (options.replica >= directory_.entries.size()) directory_.entries.resize(options.replica + 1);
    directory_.entries[options.replica].epoch = epoch;
    if (options.mode == CertMode::sig) {
      directory_.entries[options.replica].pub = crypto::keypair_from_seed(p.signing_seed).pub;
    }
  }
  return tc;
}

A2mLog AdminConsole::deploy_log(ReplicaId replica, std::uint64_t window) {
  std::uint64_t epoch = replica < directory_.entries.size() ? directory_.entries[replica].epoch : 0;
  return A2mLog(TcIdentity{replica, epoch}, directory_.mode, provisioning_for(replica, epoch), window);
}

SnapshotBlob AdminConsole::snapshot(TrustedComponent& tc) {
  if (!tc.alive() || !tc.initialized()) throw TcError(TcErrc::unavailable, "snapshot of unavailable component");
  Encoder e;
  e.u32(tc.identity_.replica).u64(tc.identity_.epoch);
  e.u8(static_cast<std::uint8_t>(tc.options_.mode)).u8(static_cast<std::uint8_t>(tc.options_.policy));
  e.u64(tc.options_.window).u64(tc.window_low_).u64(tc.created_counters_);
  e.bytes(tc.secret_.shared_key).digest(tc.secret_.signing_seed);
  e.u32(static_cast<std::uint32_t>(tc.counters_.size()));
  for (const auto& [id, state] : tc.counters_) {
    e.u64(id.name).u64(state.next.view).u64(state.next.value).u64(state.highest);
  }
  tc.crash();

  SnapshotBlob blob;
  blob.source = tc.identity_;
  Encoder nonce;
  nonce.str("tc-snapshot").digest(seed_).u64(++snapshots_).u32(tc.identity_.replica);
  blob.id = nonce.hash();
  blob.sealed = crypto::seal(sealing_key_, blob.id, e.data());
  return blob;
}

void AdminConsole::restore(TrustedComponent& target, const SnapshotBlob& blob) {
  if (used_blobs_.count(blob.id) != 0) throw TcError(TcErrc::restore_refused, "snapshot blob already used");
  if (!target.alive() || target.certificate_count() != 0) {
    throw TcError(TcErrc::restore_refused, "restore target has already issued certificates");
  }
  Bytes plain;
  if (!crypto::unseal(sealing_key_, blob.id, blob.sealed, plain)) {
    throw TcError(TcErrc::restore_refused, "snapshot blob failed authentication");
  }
  Decoder d(plain);
  TcIdentity id{d.u32(), 0};
  id.epoch = d.u64();
  if (id.replica != target.identity_.replica) {
    throw TcError(TcErrc::restore_refused, "snapshot belongs to another replica");
  }
  TcOptions options = target.options_;
  options.mode = static_cast<CertMode>(d.u8());
  options.policy = static_cast<CounterPolicy>(d.u8());
  options.window = d.u64();
  std::uint64_t low = d.u64();
  std::uint64_t created = d.u64();
  Provisioning secret;
  Bytes shared = d.bytes();
  std::copy(shared.begin(), shared.end(), secret.shared_key.begin());
  secret.signing_seed = d.digest();
  std::map<CounterId, TrustedComponent::CounterState> counters;
  std::uint32_t count = d.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CounterId cid{d.u64()};
    TrustedComponent::CounterState s;
    s.next.view = d.u64();
    s.next.value = d.u64();
    s.highest = d.u64();
    counters[cid] = s;
  }

  used_blobs_.insert(blob.id);
  target.options_ = options;
  target.identity_ = id;
  target.install(secret);
  target.window_low_ = low;
  target.created_counters_ = created;
  target.counters_ = std::move(counters);
}

}  // namespace tcbft::tc
