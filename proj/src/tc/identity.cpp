#include "tcbft/tc/identity.hpp"

#include "tcbft/core/encoding.hpp"

namespace tcbft::tc {

std::string_view to_string(CertMode m) { return m == CertMode::hmac ? "hmac" : "sig"; }

std::string_view to_string(CounterPolicy p) { return p == CounterPolicy::strict ? "strict" : "vulnerable"; }

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::prepare: return "prepare";
    case Phase::commit: return "commit";
    case Phase::checkpoint: return "checkpoint";
    case Phase::view_change: return "view_change";
    case Phase::new_view: return "new_view";
  }
  return "?";
}

std::string_view to_string(TcErrc e) {
  switch (e) {
    case TcErrc::unavailable: return "TcUnavailable";
    case TcErrc::window_exceeded: return "WindowExceeded";
    case TcErrc::equivocation_refused: return "EquivocationRefused";
    case TcErrc::out_of_order: return "OutOfOrder";
    case TcErrc::mode_violation: return "ModeViolation";
    case TcErrc::restore_refused: return "RestoreRefused";
    case TcErrc::unknown_counter: return "UnknownCounter";
    case TcErrc::invalid_argument: return "InvalidArgument";
  }
  return "?";
}

std::string_view to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::valid: return "valid";
    case VerifyStatus::invalid: return "invalid";
    case VerifyStatus::stale_epoch: return "StaleEpoch";
    case VerifyStatus::unknown_replica: return "unknown_replica";
  }
  return "?";
}

CounterId CounterId::derived(ReplicaId replica, std::uint32_t purpose) {
  Encoder e;
  e.str("tcbft-counter").u32(replica).u32(purpose);
  Digest d = e.hash();
  std::uint64_t name = 0;
  for (int i = 0; i < 8; ++i) name |= std::uint64_t{d.bytes[i]} << (8 * i);
  return CounterId{name};
}

Bytes certified_payload(const UniqueIdentifier& ui) {
  Encoder e;
  e.str("tcbft-ui").u8(static_cast<std::uint8_t>(ui.mode)).u64(ui.tc.epoch).u32(ui.tc.replica);
  e.u64(ui.counter.name).u64(ui.value).digest(ui.msg_hash);
  if (ui.context) {
    e.u8(1).u8(static_cast<std::uint8_t>(ui.context->phase)).u64(ui.context->view).u64(ui.context->seq);
  } else {
    e.u8(0);
  }
  return e.take();
}

Bytes certified_payload(const SkipAttestation& skip) {
  Encoder e;
  e.str("tcbft-skip").u8(static_cast<std::uint8_t>(skip.mode)).u64(skip.tc.epoch).u32(skip.tc.replica);
  e.u64(skip.counter.name).u64(skip.from.view).u64(skip.from.value).u64(skip.to.view).u64(skip.to.value);
  e.u64(skip.highest_certified);
  return e.take();
}

}  // namespace tcbft::tc
