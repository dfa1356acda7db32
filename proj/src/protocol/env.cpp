#include "tcbft/protocol/env.hpp"

namespace tcbft::protocol {

std::string_view to_string(Note::Kind k) {
  switch (k) {
    case Note::Kind::admitted: return "admitted";
    case Note::Kind::buffered: return "buffered";
    case Note::Kind::prepared: return "prepared";
    case Note::Kind::committed: return "committed";
    case Note::Kind::executed: return "executed";
    case Note::Kind::flagged: return "flagged";
    case Note::Kind::view_change: return "view_change";
    case Note::Kind::new_view: return "new_view";
    case Note::Kind::stable: return "stable";
    case Note::Kind::state_transfer: return "state_transfer";
    case Note::Kind::stale_epoch: return "stale_epoch";
    case Note::Kind::tc_refused: return "tc_refused";
    case Note::Kind::decision_sent: return "decision_sent";
    case Note::Kind::decision_suppressed: return "decision_suppressed";
    case Note::Kind::decision_accepted: return "decision_accepted";
  }
  return "?";
}

}  // namespace tcbft::protocol
