#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcbft/sim/config.hpp"

namespace tcbft::sim {

struct ExploreOptions {
  SimConfig config;
  std::size_t max_depth = 400;       // events along one path
  std::size_t max_states = 500'000;  // distinct states visited
  /// Timers normally fire only once no message is in flight; with this set
  /// the earliest timer is also a choice at every step.
  bool timers_anytime = false;
  /// States where a correct replica aims past this view are not expanded,
  /// which ends paths of repeated view-change timeouts.
  View max_view = 2;
};

struct ExploreResult {
  std::uint64_t states = 0;       // distinct states expanded
  std::uint64_t transitions = 0;  // events processed over all branches
  std::uint64_t revisits = 0;     // branches that reached a known state
  std::uint64_t depth_cuts = 0;   // branches cut by max_depth
  std::uint64_t view_cuts = 0;    // states not expanded because of max_view
  std::uint64_t terminal = 0;     // states with nothing left to process
  std::size_t deepest = 0;
  std::uint64_t view_change_states = 0;  // states where a correct replica installed a later view
  std::size_t first_view_change = 0;     // depth of the first such state, 0 if none
  bool budget_exhausted = false;         // max_states reached
  std::vector<std::string> violations;   // first violation per offending path, deduplicated

  /// Every state reachable within max_depth events was visited.
  bool complete() const { return !budget_exhausted; }
};

/// Depth-first enumeration of delivery orders from the initial state of
/// `options.config`, judging every reached state with the safety oracles.
/// States are identified by World::fingerprint, which ignores the clock.
ExploreResult explore(const ExploreOptions& options);

/// The small configuration the exhaustive check runs: n = 3, one client
/// with one request, no checkpoints, and the named script tuned so its
/// attack falls at the first counter value. With `leak` the conflicting
/// statement reaches every follower, so the run crosses a view change.
SimConfig small_model_config(const std::string& script, bool leak = false);

}  // namespace tcbft::sim
