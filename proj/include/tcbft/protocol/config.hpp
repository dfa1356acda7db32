#pragma once

#include <cstdint>
#include <string_view>

#include "tcbft/core/types.hpp"

namespace tcbft::protocol {

/// detection: gapless USIG timelines expose equivocation.
/// prevention: per-phase TrInX contexts make it impossible.
enum class Mode : std::uint8_t { detection, prevention };

/// How followers treat a certificate from a counter they have not seen.
/// pinned: only the counter derived from the sender's id is accepted.
/// announced: a new counter starting at value 1 replaces the old timeline.
enum class CounterAcceptance : std::uint8_t { pinned, announced };

std::string_view to_string(Mode m);
std::string_view to_string(CounterAcceptance a);

struct ProtocolConfig {
  std::uint32_t f = 1;
  std::uint32_t batch_size = 1;
  Mode mode = Mode::detection;

  bool decisions = true;
  TimeNs decision_delay = 6 * kMillisecond;  // 0 broadcasts at commit time
  bool pipelining = true;
  std::uint32_t pipeline_depth = 8;

  std::uint64_t checkpoint_interval = 100;  // 0 disables checkpoints
  TimeNs batch_timeout = 6 * kMillisecond;  // 0 waits for a full batch
  TimeNs suspect_timeout = 100 * kMillisecond;
  TimeNs view_change_timeout = 100 * kMillisecond;
  TimeNs fetch_timeout = 20 * kMillisecond;

  CounterAcceptance counter_acceptance = CounterAcceptance::pinned;
  std::uint64_t tc_window = 0;  // 0 derives it from the checkpoint interval
  Digest client_key_seed;

  std::uint32_t n() const { return 2 * f + 1; }
  std::uint32_t quorum() const { return f + 1; }
  ReplicaId leader_of(View v) const { return static_cast<ReplicaId>(v % n()); }
  std::uint64_t effective_tc_window() const;
};

}  // namespace tcbft::protocol
