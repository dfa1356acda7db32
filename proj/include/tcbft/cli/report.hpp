#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

#include "tcbft/sim/measure.hpp"
#include "tcbft/sim/world.hpp"

namespace tcbft::cli {

/// Header shared by run tallies and sweep output.
inline constexpr const char* kTallyHeader =
    "f,n,B,delta,decisions,msgs_total,msgs_decision,bytes_total,overhead_msgs,overhead_bytes";

/// One tally row; the overhead columns stay empty without a baseline.
std::string tally_row(const sim::Trace& trace, const std::optional<sim::Overhead>& overhead = std::nullopt);

/// The ordered event log, one JSON object per line.
std::string trace_jsonl(const sim::Trace& trace);

nlohmann::json summary_json(const sim::Trace& trace);

/// client,seq,submit_t,complete_t in virtual nanoseconds.
std::string latency_csv(const sim::Trace& trace);

/// Human-readable account: what the script did, how the replicas reacted,
/// where they ended up and what the oracles concluded.
std::string narrative(const sim::Trace& trace);

/// trace.jsonl, summary.json, tallies.csv and latency.csv under `dir`.
void write_run_files(const sim::Trace& trace, const std::filesystem::path& dir);

}  // namespace tcbft::cli
