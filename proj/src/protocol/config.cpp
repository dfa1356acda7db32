#include "tcbft/protocol/config.hpp"

#include <algorithm>

namespace tcbft::protocol {

std::string_view to_string(Mode m) {
  return m == Mode::detection ? "detection" : "prevention";
}

std::string_view to_string(CounterAcceptance a) {
  return a == CounterAcceptance::pinned ? "pinned" : "announced";
}

std::uint64_t ProtocolConfig::effective_tc_window() const {
  if (tc_window != 0) return tc_window;
  if (checkpoint_interval == 0) return std::uint64_t{1} << 40;
  return 4 * checkpoint_interval * std::max<std::uint64_t>(1, pipeline_depth);
}

}  // namespace tcbft::protocol
