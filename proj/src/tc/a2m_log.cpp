#include "tcbft/tc/a2m_log.hpp"

#include <fmt/format.h>

#include "tcbft/tc/trusted_component.hpp"

namespace tcbft::tc {

A2mLog::A2mLog(TcIdentity identity, CertMode mode, const Provisioning& secret, std::uint64_t window)
    : identity_(identity),
      mode_(mode),
      secret_(secret),
      window_(window) {
  if (mode_ == CertMode::sig) signing_key_ = crypto::keypair_from_seed(secret.signing_seed).secret;
}

A2mLog::Entry A2mLog::append(const Digest& msg_hash) {
  if (next_ > low_ + window_) {
    throw TcError(TcErrc::window_exceeded, fmt::format("position {} beyond high watermark", next_));
  }
  UniqueIdentifier ui;
  ui.tc = identity_;
  ui.counter = CounterId::a2m(identity_.replica);
  ui.value = next_;
  ui.msg_hash = msg_hash;
  ui.mode = mode_;
  Bytes payload = certified_payload(ui);
  if (mode_ == CertMode::hmac) {
    auto mac = crypto::hmac_sha256(secret_.shared_key, payload);
    ui.cert.assign(mac.begin(), mac.end());
  } else {
    ui.cert = crypto::sign(signing_key_, payload);
  }
  entries_[next_] = ui;
  return Entry{next_++, ui};
}

A2mLog::Lookup A2mLog::lookup(std::uint64_t position) const {
  if (position <= low_) return {LookupStatus::truncated, std::nullopt};
  auto it = entries_.find(position);
  if (it == entries_.end()) return {LookupStatus::unassigned, std::nullopt};
  return {LookupStatus::found, it->second};
}

void A2mLog::truncate(std::uint64_t new_low) {
  if (new_low <= low_) throw TcError(TcErrc::invalid_argument, "truncate must raise the low watermark");
  low_ = new_low;
  entries_.erase(entries_.begin(), entries_.upper_bound(new_low));
  if (next_ <= low_) next_ = low_ + 1;
}

VerifyStatus verify_log_entry(const UniqueIdentifier& attestation, std::uint64_t position,
                              const Digest& msg_hash, const TcDirectory& directory, TrustedComponent& own) {
  if (attestation.value != position || attestation.counter != CounterId::a2m(attestation.tc.replica)) {
    return VerifyStatus::invalid;
  }
  return verify(attestation, msg_hash, directory, own);
}

}  // namespace tcbft::tc
