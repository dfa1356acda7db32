#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tcbft/cost/model.hpp"
#include "tcbft/sim/world.hpp"

namespace tcbft::sim {

struct MeasureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resource usage of one run, aggregated over all nodes.
struct ResourceTally {
  std::uint64_t msgs_total = 0;
  std::uint64_t msgs_decision = 0;
  std::uint64_t bytes_total = 0;
  std::uint64_t bytes_decision = 0;
  std::uint64_t replica_link_bytes = 0;
  std::uint64_t client_link_bytes = 0;
  std::uint64_t certificates = 0;  // certificates issued by trusted components
  std::uint64_t tc_accesses = 0;
  std::uint64_t ops = 0;  // ordered client operations

  double msgs_per_op() const;
  double bytes_per_op() const;
};

ResourceTally tally_of(const Trace& trace);

/// A run with decisions next to the same run without.
struct Overhead {
  ResourceTally with;
  ResourceTally without;
  double msgs = 0;   // extra messages per ordered operation, as a fraction
  double bytes = 0;  // extra bytes per ordered operation, as a fraction
};

/// Throws MeasureError unless the two traces share every setting except
/// the decisions switch, which must be on in `with` and off in `without`.
Overhead measure(const Trace& with, const Trace& without);

/// Fault-free closed-loop run in which every batch is full: B clients each
/// submit `batches` requests, the leader never proposes a partial batch,
/// checkpoints are off and decisions go out at commit time.
SimConfig overhead_config(std::uint32_t f, std::uint32_t batch_size, std::uint64_t batches, bool decisions,
                          std::size_t tx_size = 256);

/// One row of an overhead sweep: simulated next to analytic.
struct OverheadRow {
  std::uint32_t f = 0;
  std::uint32_t batch_size = 0;
  std::size_t tx_size = 0;
  std::uint64_t batches = 0;
  Overhead simulated;
  cost::MessageCounts model_with;
  cost::MessageCounts model_without;
  double model_msgs = 0;
  double model_bytes = 0;

  /// Simulated minus analytic message count across both runs; 0 when the
  /// simulator and the model agree.
  std::int64_t msg_diff() const;
};

OverheadRow overhead_row(std::uint32_t f, std::uint32_t batch_size, std::uint64_t batches, std::size_t tx_size = 256);

}  // namespace tcbft::sim
