#include "tcbft/cli/commands.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tcbft/cli/report.hpp"
#include "tcbft/cost/model.hpp"
#include "tcbft/sim/measure.hpp"

namespace tcbft::cli {

using nlohmann::json;

namespace {

const std::vector<std::string> kScripts{"none",           "equivocate_withhold", "counter_identity",
                                        "silent_repliers", "crash_tcs",          "gap_forever"};

sim::SimConfig with_overrides(const sim::SimConfig& base, const std::vector<std::string>& overrides) {
  json j = sim::config_to_json(base);
  for (const auto& o : overrides) sim::apply_override(j, o);
  return sim::config_from_json(j);
}

bool safety_gate(const sim::Verdicts& v, bool expect_violation) { return v.safety_ok() != expect_violation; }

}  // namespace

std::filesystem::path default_out_dir() {
  const char* env = std::getenv("TCBFT_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("out");
}

sim::SimConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw UsageError(fmt::format("cannot read config {}", path));
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(fmt::format("config {} is not valid JSON: {}", path, e.what()));
    }
  }
  for (const auto& o : overrides) sim::apply_override(j, o);
  return sim::config_from_json(j);
}

int cmd_run(const RunOptions& options, std::ostream& out) {
  sim::SimConfig config = load_config(options.config_path, options.overrides);
  if (options.seed) config.seed = *options.seed;
  config.validate();
  const sim::Trace trace = sim::run(config);
  const auto dir = options.out.empty() ? default_out_dir() : options.out;
  write_run_files(trace, dir);

  const auto& v = trace.verdicts;
  out << fmt::format("ran {} for {:.0f} ms of virtual time: {} operations, {} messages\n", config.script.name,
                     static_cast<double>(trace.end) / kMillisecond, trace.ops_completed, trace.tally.msgs_total());
  out << fmt::format("safety {}, liveness {}, responsiveness {}\n", v.safety_ok() ? "ok" : "violated",
                     v.liveness_ok() ? "ok" : "stalled", v.responsive() ? "all clients completed" : "stalled");
  for (const auto& s : v.safety) out << "  " << s << "\n";
  out << fmt::format("wrote {}\n", dir.string());
  return safety_gate(v, options.expect_violation) ? kOk : kVerdictFailure;
}

int cmd_overhead(const OverheadOptions& options, std::ostream& out) {
  if (options.f_list.empty() || options.b_list.empty() || options.tx_list.empty()) {
    throw UsageError("overhead needs non-empty f, B and tx lists");
  }
  std::ostringstream csv;
  csv << kOverheadHeader << "\n";
  bool agree = true;
  for (std::size_t tx : options.tx_list) {
    for (auto f : options.f_list) {
      for (auto b : options.b_list) {
        const auto row = sim::overhead_row(f, b, options.batches, tx);
        agree = agree && row.msg_diff() == 0 &&
                row.simulated.with.msgs_decision == row.model_with.decisions;
        csv << fmt::format("{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", f, 2 * f + 1, b, tx,
                           options.batches, row.model_with.total() + row.model_without.total(),
                           row.simulated.with.msgs_total + row.simulated.without.msgs_total, row.msg_diff(),
                           row.model_with.decisions, row.simulated.with.msgs_decision, row.model_msgs,
                           row.simulated.msgs, row.model_bytes, row.simulated.bytes);
      }
    }
  }
  out << csv.str();
  if (options.csv) {
    std::ofstream file(*options.csv, std::ios::binary);
    if (!file) throw UsageError(fmt::format("cannot write {}", options.csv->string()));
    file << csv.str();
  }
  return agree ? kOk : kVerdictFailure;
}

int cmd_table1(std::ostream& out, bool as_json) {
  const auto flexi_vs_minbft = cost::verification_ratio(cost::Protocol::flexi_bft, cost::Protocol::minbft);
  if (as_json) {
    json rows = json::array();
    for (auto p : cost::kProtocols) {
      const auto c = cost::table1_costs(p);
      rows.push_back({{"protocol", cost::to_string(p)},
                      {"leader_msgs", c.leader_msgs.symbolic()},
                      {"crypto", c.crypto_symbolic()},
                      {"tc_accesses", c.tc_accesses.symbolic()}});
    }
    json ratios = json::array();
    for (std::uint64_t f : {1, 2, 10, 100, 1000}) {
      const auto r = cost::leader_bandwidth_ratio(f);
      ratios.push_back({{"f", f}, {"num", r.num}, {"den", r.den}, {"value", r.value()}});
    }
    out << json{{"rows", rows},
                {"leader_bandwidth_ratio", ratios},
                {"verification_ratio_flexibft_over_minbft", flexi_vs_minbft}}
               .dump(2)
        << "\n";
    return kOk;
  }
  out << fmt::format("{:<10} {:>12} {:>14} {:>12}\n", "protocol", "leader msgs", "crypto (s+v)", "tc accesses");
  for (auto p : cost::kProtocols) {
    const auto c = cost::table1_costs(p);
    out << fmt::format("{:<10} {:>12} {:>14} {:>12}\n", cost::to_string(p), c.leader_msgs.symbolic(),
                       c.crypto_symbolic(), c.tc_accesses.symbolic());
  }
  out << "\nextra leader bandwidth of 3f+1 over 2f+1:\n";
  for (std::uint64_t f : {1, 2, 10, 100, 1000}) {
    const auto r = cost::leader_bandwidth_ratio(f);
    out << fmt::format("  f={:<5} {}/{} = {:.4f}\n", f, r.num, r.den, r.value());
  }
  out << fmt::format("\nverifications per replica, Flexi-BFT over MinBFT: {:.1f}\n", flexi_vs_minbft);
  return kOk;
}

sim::SimConfig attack_preset(const std::string& script) {
  if (std::find(kScripts.begin(), kScripts.end(), script) == kScripts.end()) {
    throw UsageError(fmt::format("unknown script '{}'", script));
  }
  sim::SimConfig c;
  c.script.name = script;
  c.clients = 4;
  if (script == "equivocate_withhold") {
    // Slow link between the two followers, so each side keeps only what the
    // leader gave it until the link recovers.
    c.partitions.push_back({100 * kMillisecond, 400 * kMillisecond, {{1}, {2}}});
  } else if (script == "counter_identity") {
    c.clients = 2;
    c.vulnerable_tc = true;
    c.counter_acceptance = protocol::CounterAcceptance::announced;
  } else if (script == "silent_repliers") {
    c.clients = 2;
    c.decisions = false;
    c.reply_policy = clients::ReplyPolicy::n_minus_f;
  } else if (script == "crash_tcs") {
    c.clients = 2;
    c.script.params = {{"k", 1}};
  }
  return c;
}

int cmd_attack(const AttackOptions& options, std::ostream& out) {
  const sim::SimConfig config = with_overrides(attack_preset(options.script), options.overrides);
  const sim::Trace trace = sim::run(config);
  out << narrative(trace);
  if (options.out) {
    write_run_files(trace, *options.out);
    std::ofstream(*options.out / "narrative.txt", std::ios::binary) << narrative(trace);
  }
  return safety_gate(trace.verdicts, options.expect_violation) ? kOk : kVerdictFailure;
}

int cmd_sweep(const SweepOptions& options, std::ostream& out) {
  if (options.f_list.empty() || options.b_list.empty()) throw UsageError("sweep needs non-empty f and B lists");
  cost::SizeModel sizes;
  sizes.tx_bytes = options.tx;
  out << kTallyHeader << "\n";
  for (auto f : options.f_list) {
    for (auto b : options.b_list) {
      for (bool decisions : {false, true}) {
        const auto m = cost::minbft_messages(f, b, options.batches, decisions);
        const auto bytes = cost::minbft_bytes(f, b, options.batches, decisions, sizes, false);
        std::string ovh_msgs;
        std::string ovh_bytes;
        if (decisions) {
          ovh_msgs = fmt::format("{:.6f}", cost::decision_msg_overhead(f, b));
          ovh_bytes = fmt::format("{:.6f}", cost::decision_byte_overhead(f, b, sizes, false));
        }
        out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", f, 2 * f + 1, b, 0, decisions ? 1 : 0, m.total(),
                           m.decisions, bytes.total(), ovh_msgs, ovh_bytes);
      }
    }
  }
  return kOk;
}

}  // namespace tcbft::cli
