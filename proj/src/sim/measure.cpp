#include "tcbft/sim/measure.hpp"

#include <fmt/format.h>

namespace tcbft::sim {

using protocol::MsgKind;

double ResourceTally::msgs_per_op() const {
  return ops == 0 ? 0.0 : static_cast<double>(msgs_total) / static_cast<double>(ops);
}

double ResourceTally::bytes_per_op() const {
  return ops == 0 ? 0.0 : static_cast<double>(bytes_total) / static_cast<double>(ops);
}

ResourceTally tally_of(const Trace& trace) {
  ResourceTally t;
  t.msgs_total = trace.tally.msgs_total();
  t.msgs_decision = trace.tally.of(MsgKind::decision);
  t.bytes_total = trace.tally.bytes_total();
  t.bytes_decision = trace.tally.bytes_of(MsgKind::decision);
  t.replica_link_bytes = trace.tally.replica_link_bytes;
  t.client_link_bytes = trace.tally.client_link_bytes;
  for (const auto& r : trace.replicas) {
    t.certificates += r.certificates;
    t.tc_accesses += r.tc_accesses;
  }
  t.ops = trace.ops_completed;
  return t;
}

Overhead measure(const Trace& with, const Trace& without) {
  if (!with.config.decisions || without.config.decisions) {
    throw MeasureError("the first run needs decisions on and the baseline decisions off");
  }
  auto a = config_to_json(with.config);
  auto b = config_to_json(without.config);
  a.erase("decisions");
  b.erase("decisions");
  if (a != b) throw MeasureError(fmt::format("runs differ beyond the decisions switch: {}", nlohmann::json::diff(b, a).dump()));

  Overhead o;
  o.with = tally_of(with);
  o.without = tally_of(without);
  if (o.with.ops == 0 || o.without.ops == 0) throw MeasureError("a run ordered no operations");
  o.msgs = o.with.msgs_per_op() / o.without.msgs_per_op() - 1.0;
  o.bytes = o.with.bytes_per_op() / o.without.bytes_per_op() - 1.0;
  return o;
}

SimConfig overhead_config(std::uint32_t f, std::uint32_t batch_size, std::uint64_t batches, bool decisions,
                          std::size_t tx_size) {
  SimConfig c;
  c.f = f;
  c.batch_size = batch_size;
  c.tx_size = tx_size;
  c.sizes.tx_bytes = tx_size;
  c.clients = batch_size;
  c.requests_per_client = batches;
  c.decisions = decisions;
  c.delta = 0;
  c.batch_timeout = 0;
  c.checkpoint_interval = 0;
  c.duration = 60'000 * kMillisecond;
  c.trace = false;
  return c;
}

std::int64_t OverheadRow::msg_diff() const {
  const auto sim = static_cast<std::int64_t>(simulated.with.msgs_total + simulated.without.msgs_total);
  const auto model = static_cast<std::int64_t>(model_with.total() + model_without.total());
  return sim - model;
}

OverheadRow overhead_row(std::uint32_t f, std::uint32_t batch_size, std::uint64_t batches, std::size_t tx_size) {
  const SimConfig with = overhead_config(f, batch_size, batches, true, tx_size);
  const SimConfig without = overhead_config(f, batch_size, batches, false, tx_size);
  OverheadRow row;
  row.f = f;
  row.batch_size = batch_size;
  row.tx_size = tx_size;
  row.batches = batches;
  row.simulated = measure(run(with), run(without));
  row.model_with = cost::minbft_messages(f, batch_size, batches, true);
  row.model_without = cost::minbft_messages(f, batch_size, batches, false);
  row.model_msgs = cost::decision_msg_overhead(f, batch_size);
  row.model_bytes = cost::decision_byte_overhead(f, batch_size, with.sizes, with.threshold_proofs);
  return row;
}

}  // namespace tcbft::sim
