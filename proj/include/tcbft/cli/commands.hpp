#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcbft/sim/config.hpp"

namespace tcbft::cli {

/// Stable exit codes.
enum ExitCode : int { kOk = 0, kVerdictFailure = 1, kUsage = 2 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// TCBFT_OUT_DIR when set, "out" otherwise.
std::filesystem::path default_out_dir();

/// Config file (empty path for defaults) with dotted overrides applied.
sim::SimConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  std::vector<std::string> overrides;
  bool expect_violation = false;
};

/// Runs one simulation and writes trace.jsonl, summary.json, tallies.csv
/// and latency.csv. Exit 0 iff the safety verdict matches expectations.
int cmd_run(const RunOptions& options, std::ostream& out);

struct OverheadOptions {
  std::vector<std::uint32_t> f_list{10, 30};
  std::vector<std::uint32_t> b_list{500};
  std::vector<std::size_t> tx_list{256};
  std::uint64_t batches = 2;
  std::optional<std::filesystem::path> csv;
};

inline constexpr const char* kOverheadHeader =
    "f,n,B,tx,batches,model_msgs,sim_msgs,msg_diff,model_decisions,sim_decisions,overhead_msgs_model,"
    "overhead_msgs_sim,overhead_bytes_model,overhead_bytes_sim";

/// Analytic and simulated overhead side by side, one row per (f, B, tx).
/// Exit 1 when any simulated message count differs from the model.
int cmd_overhead(const OverheadOptions& options, std::ostream& out);

/// Normal-case costs of the six protocols, as text or JSON.
int cmd_table1(std::ostream& out, bool as_json);

/// Curated settings for each script, tuned for a readable narrative.
sim::SimConfig attack_preset(const std::string& script);

struct AttackOptions {
  std::string script;
  std::vector<std::string> overrides;
  std::optional<std::filesystem::path> out;
  bool expect_violation = false;
};

/// Runs the preset and prints its narrative. Exit 1 when safety fails
/// unexpectedly or holds when a violation was expected.
int cmd_attack(const AttackOptions& options, std::ostream& out);

struct SweepOptions {
  std::vector<std::uint32_t> f_list{1, 2, 3, 10, 30};
  std::vector<std::uint32_t> b_list{1, 10, 100, 500};
  std::size_t tx = 256;
  std::uint64_t batches = 2;
};

/// Analytic overhead sweep in the tally CSV schema.
int cmd_sweep(const SweepOptions& options, std::ostream& out);

}  // namespace tcbft::cli
