#include "tcbft/tc/trusted_component.hpp"

#include <fmt/format.h>

#include "tcbft/core/encoding.hpp"

namespace tcbft::tc {

TrustedComponent::TrustedComponent(TcOptions options, std::uint64_t epoch)
    : options_(options), identity_{options.replica, epoch} {}

void TrustedComponent::install(const Provisioning& secret) {
  secret_ = secret;
  if (options_.mode == CertMode::sig) signing_key_ = crypto::keypair_from_seed(secret.signing_seed).secret;
  initialized_ = true;
}

void TrustedComponent::require_usable(const char* op) {
  if (!alive_ || !initialized_) {
    throw TcError(TcErrc::unavailable, fmt::format("tc {}: {} on unavailable component", identity_.replica, op));
  }
  ++accesses_;
}

TrustedComponent::CounterState& TrustedComponent::counter(CounterId id) {
  auto it = counters_.find(id);
  if (it != counters_.end()) return it->second;
  bool builtin = id == CounterId::usig(identity_.replica);
  for (auto phase : {Phase::prepare, Phase::commit, Phase::checkpoint, Phase::view_change, Phase::new_view}) {
    builtin = builtin || id == CounterId::for_phase(identity_.replica, phase);
  }
  if (!builtin) throw TcError(TcErrc::unknown_counter, "unknown counter");
  return counters_[id];
}

Bytes TrustedComponent::authenticate(const Bytes& payload) const {
  if (options_.mode == CertMode::hmac) {
    auto mac = crypto::hmac_sha256(secret_.shared_key, payload);
    return Bytes(mac.begin(), mac.end());
  }
  return crypto::sign(signing_key_, payload);
}

UniqueIdentifier TrustedComponent::issue(CounterId counter, std::uint64_t value, const Digest& msg_hash,
                                         std::optional<ContextId> context) {
  UniqueIdentifier ui;
  ui.tc = identity_;
  ui.counter = counter;
  ui.value = value;
  ui.msg_hash = msg_hash;
  ui.context = context;
  ui.mode = options_.mode;
  ui.cert = authenticate(certified_payload(ui));
  issued_.push_back(ui);
  return ui;
}

SkipAttestation TrustedComponent::attest_skip(CounterId counter, Position from, Position to,
                                              std::uint64_t highest) {
  SkipAttestation s;
  s.tc = identity_;
  s.counter = counter;
  s.from = from;
  s.to = to;
  s.highest_certified = highest;
  s.mode = options_.mode;
  s.cert = authenticate(certified_payload(s));
  return s;
}

UniqueIdentifier TrustedComponent::create_ui(const Digest& msg_hash) {
  return create_ui(CounterId::usig(identity_.replica), msg_hash);
}

UniqueIdentifier TrustedComponent::create_ui(CounterId id, const Digest& msg_hash) {
  require_usable("create_ui");
  CounterState& c = counter(id);
  std::uint64_t value = c.next.value;
  if (value > window_low_ + options_.window) {
    throw TcError(TcErrc::window_exceeded, fmt::format("value {} beyond high watermark", value));
  }
  c.next.value = value + 1;
  c.highest = value;
  return issue(id, value, msg_hash, std::nullopt);
}

SkipAttestation TrustedComponent::skip(std::uint64_t count) {
  require_usable("skip");
  if (count == 0) throw TcError(TcErrc::invalid_argument, "skip count must be positive");
  CounterId id = CounterId::usig(identity_.replica);
  CounterState& c = counter(id);
  Position from = c.next;
  if (from.value + count - 1 > window_low_ + options_.window) {
    throw TcError(TcErrc::window_exceeded, "skip beyond high watermark");
  }
  c.next.value = from.value + count;
  return attest_skip(id, from, c.next, c.highest);
}

UniqueIdentifier TrustedComponent::certify(const ContextId& context, const Digest& msg_hash) {
  require_usable("certify");
  CounterId id = CounterId::for_phase(identity_.replica, context.phase);
  CounterState& c = counter(id);
  Position at{context.view, context.seq};
  if (at < c.next) {
    throw TcError(TcErrc::equivocation_refused,
                  fmt::format("context ({}, v={}, s={}) already certified or voided", to_string(context.phase),
                              context.view, context.seq));
  }
  if (context.seq != c.next.value) {
    throw TcError(TcErrc::out_of_order, fmt::format("context ({}, v={}, s={}) skips ahead of s={}",
                                                    to_string(context.phase), context.view, context.seq,
                                                    c.next.value));
  }
  if (context.seq > window_low_ + options_.window) {
    throw TcError(TcErrc::window_exceeded, fmt::format("seq {} beyond high watermark", context.seq));
  }
  c.next = Position{context.view, context.seq + 1};
  c.highest = std::max(c.highest, context.seq);
  return issue(id, context.seq, msg_hash, context);
}

SkipAttestation TrustedComponent::skip_to(Phase phase, View view, Seq start_seq) {
  require_usable("skip_to");
  CounterId id = CounterId::for_phase(identity_.replica, phase);
  CounterState& c = counter(id);
  Position to{view, start_seq};
  if (to <= c.next) throw TcError(TcErrc::equivocation_refused, "skip target not ahead of counter");
  if (start_seq > window_low_ + options_.window + 1) {
    throw TcError(TcErrc::window_exceeded, "skip beyond high watermark");
  }
  Position from = c.next;
  c.next = to;
  return attest_skip(id, from, to, c.highest);
}

CounterId TrustedComponent::create_counter() {
  require_usable("create_counter");
  if (options_.policy != CounterPolicy::vulnerable) {
    throw TcError(TcErrc::mode_violation, "counter creation disabled under strict policy");
  }
  Encoder e;
  e.str("tcbft-created-counter").u32(identity_.replica).u64(identity_.epoch).u64(++created_counters_);
  e.bytes(secret_.signing_seed.bytes);
  Digest d = e.hash();
  std::uint64_t name = 0;
  for (int i = 0; i < 8; ++i) name |= std::uint64_t{d.bytes[i]} << (8 * i);
  CounterId id{name};
  counters_[id] = CounterState{};
  return id;
}

void TrustedComponent::advance_window(std::uint64_t low) {
  if (low > window_low_) window_low_ = low;
}

bool TrustedComponent::check_mac(ByteView payload, ByteView mac) {
  require_usable("verify");
  return crypto::hmac_verify(secret_.shared_key, payload, mac);
}

namespace {

VerifyStatus check(ReplicaId replica, std::uint64_t epoch, CertMode mode, const Bytes& payload, const Bytes& cert,
                   const TcDirectory& directory, TrustedComponent& own) {
  const auto* entry = directory.find(replica);
  if (entry == nullptr) return VerifyStatus::unknown_replica;
  if (mode != directory.mode) return VerifyStatus::invalid;
  if (entry->epoch != epoch) return VerifyStatus::stale_epoch;
  bool ok = mode == CertMode::sig ? crypto::verify(entry->pub, payload, cert) : own.check_mac(payload, cert);
  return ok ? VerifyStatus::valid : VerifyStatus::invalid;
}

}  // namespace

VerifyStatus verify(const UniqueIdentifier& ui, const Digest& msg_hash, const TcDirectory& directory,
                    TrustedComponent& own) {
  if (ui.msg_hash != msg_hash) return VerifyStatus::invalid;
  return check(ui.tc.replica, ui.tc.epoch, ui.mode, certified_payload(ui), ui.cert, directory, own);
}

VerifyStatus verify(const SkipAttestation& skip, const TcDirectory& directory, TrustedComponent& own) {
  if (!(skip.from < skip.to)) return VerifyStatus::invalid;
  return check(skip.tc.replica, skip.tc.epoch, skip.mode, certified_payload(skip), skip.cert, directory, own);
}

}  // namespace tcbft::tc
