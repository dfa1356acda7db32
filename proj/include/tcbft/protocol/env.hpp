#pragma once

#include <string>

#include "tcbft/protocol/messages.hpp"
#include "tcbft/tc/trusted_component.hpp"

namespace tcbft::protocol {

enum class TimerKind : std::uint8_t {
  batch,
  decision,
  suspect,
  view_change,
  fetch,
  state,
  retransmit,
};

struct TimerKey {
  TimerKind kind = TimerKind::batch;
  std::uint64_t a = 0;

  auto operator<=>(const TimerKey&) const = default;
};

/// Observable protocol events. The simulator feeds them to its oracles and
/// to the trace.
struct Note {
  enum class Kind : std::uint8_t {
    admitted,       // certified message from `peer` admitted at counter `value`
    buffered,       // certified message from `peer` held back behind a gap
    prepared,       // Prepare for (view, seq, digest) accepted
    committed,      // (view, seq, digest) committed
    executed,       // seq executed; digest is the chain digest
    flagged,        // `peer` caught equivocating
    view_change,    // view change towards `view` started; value = leader cursor
    new_view,       // view installed
    stable,         // checkpoint at seq became stable
    state_transfer, // state installed up to seq
    stale_epoch,    // certificate from an unregistered component rejected
    tc_refused,     // the component refused an operation; text has the reason
    decision_sent,  // Decision for seq sent to `peer`
    decision_suppressed,
    decision_accepted,
  };

  Kind kind = Kind::admitted;
  View view = 0;
  Seq seq = 0;
  ReplicaId peer = 0;
  std::uint64_t counter = 0;  // counter name for admitted/buffered
  std::uint64_t value = 0;
  Digest digest;
  std::string text;
};

std::string_view to_string(Note::Kind k);

/// Services a replica or client uses from its surroundings.
class Env {
 public:
  virtual ~Env() = default;

  virtual TimeNs now() const = 0;
  virtual void send(NodeId to, MessagePtr msg) = 0;
  virtual void arm_timer(TimerKey key, TimeNs delay, std::uint64_t token) = 0;
  virtual tc::TrustedComponent& tc() = 0;
  virtual const tc::TcDirectory& directory() const = 0;
  virtual void note(const Note& n) = 0;
};

}  // namespace tcbft::protocol
