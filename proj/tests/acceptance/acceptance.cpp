#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcbft/cli/commands.hpp"
#include "tcbft/cli/report.hpp"
#include "tcbft/core/crypto.hpp"
#include "tcbft/cost/model.hpp"
#include "tcbft/sim/explorer.hpp"
#include "tcbft/sim/measure.hpp"
#include "tcbft/sim/suite.hpp"
#include "tcbft/sim/world.hpp"
#include "tcbft/tc/admin.hpp"

using namespace tcbft;
using nlohmann::json;

namespace {

// Tolerances, in absolute fractions.
constexpr double kMsgTolF10 = 0.005;
constexpr double kMsgTolF30 = 0.007;
constexpr double kByteTol = 0.10;
constexpr std::uint64_t kSeedsPerCell = 1000;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, std::string what) {
    if (!ok) pass = false;
    notes.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", std::move(what)));
  }
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

bool has_highlight(const sim::Trace& t, const std::string& needle) {
  for (const auto& h : t.highlights) {
    if (h.text.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::uint64_t context_duplicates(const sim::Trace& t) {
  std::uint64_t n = 0;
  for (const auto& s : t.verdicts.safety) {
    if (s.find("two certificates for context") != std::string::npos) ++n;
  }
  return n;
}

sim::SimConfig preset(const std::string& script) {
  sim::SimConfig c = cli::attack_preset(script);
  c.tc_mode = tc::CertMode::hmac;
  return c;
}

// Shared by criteria 1 and 3: one overhead sweep over both transaction sizes.
std::string overhead_csv() {
  static const std::string text = [] {
    cli::OverheadOptions o;
    o.f_list = {10, 30};
    o.b_list = {500};
    o.tx_list = {256, 1024};
    std::ostringstream out;
    const int code = cli::cmd_overhead(o, out);
    return code == cli::kOk ? out.str() : std::string();
  }();
  return text;
}

Outcome criterion1() {
  Outcome o;
  const auto rows = csv_rows(overhead_csv());
  o.require(!rows.empty(), "overhead command agrees with the model and produced rows");
  for (const auto& r : rows) {
    if (r.size() != 14 || r[3] != "256") continue;
    const auto f = std::stoul(r[0]);
    const double sim = std::stod(r[11]);
    const double model = std::stod(r[10]);
    const double target = f == 10 ? 0.02 : 0.05;
    const double tol = f == 10 ? kMsgTolF10 : kMsgTolF30;
    o.require(r[7] == "0", fmt::format("f={} B=500: simulated messages {} equal analytic {}", f, r[6], r[5]));
    o.require(r[8] == r[9], fmt::format("f={} B=500: decisions model {} sim {}", f, r[8], r[9]));
    o.require(std::abs(sim - target) <= tol && sim == model,
              fmt::format("f={} B=500: message overhead {:.3f}% vs {:.0f}%+-{:.1f}pp", f, 100 * sim, 100 * target,
                          100 * tol));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  for (std::uint32_t f : {1u, 2u, 3u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      sim::SimConfig c;
      c.f = f;
      c.seed = seed;
      c.clients = 4;
      c.batch_size = 2;
      c.pipelining = false;
      c.tc_mode = tc::CertMode::hmac;
      c.delay_max = 5 * kMillisecond;
      c.delta = 2 * c.delay_max;
      const auto t = sim::run(c);
      std::uint64_t in_trace = 0;
      for (const auto& line : t.events) {
        const auto j = json::parse(line);
        if (j.value("kind", "") == "decision") ++in_trace;
      }
      o.require(t.tally.of(protocol::MsgKind::decision) == 0 && in_trace == 0 && t.ops_completed > 0,
                fmt::format("f={} seed={}: {} ops, {} decisions", f, seed, t.ops_completed, in_trace));
    }
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  const double targets[2][2] = {{0.10, 0.89}, {0.03, 0.23}};
  const auto rows = csv_rows(overhead_csv());
  std::size_t seen = 0;
  for (const auto& r : rows) {
    if (r.size() != 14) continue;
    const auto f = std::stoul(r[0]);
    const auto tx = std::stoul(r[3]);
    const double target = targets[tx == 1024][f == 30];
    const double sim = std::stod(r[13]);
    const double model = std::stod(r[12]);
    ++seen;
    o.require(std::abs(sim - target) <= kByteTol && std::abs(sim - model) < 1e-9,
              fmt::format("f={} tx={}: byte overhead {:.2f}% vs {:.0f}%+-10pp (model {:.2f}%)", f, tx, 100 * sim,
                          100 * target, 100 * model));
  }
  o.require(seen == 4, "all four (f, tx) points measured");
  o.require(cost::SizeModel{}.ui_bytes == cost::calibrate_ui_bytes(cost::SizeModel{}).ui_bytes,
            fmt::format("shipped ui size {} is the calibration optimum", cost::SizeModel{}.ui_bytes));
  return o;
}

Outcome criterion4() {
  Outcome o;
  for (std::uint32_t f : {1u, 2u}) {
    sim::SimConfig c = preset("silent_repliers");
    c.f = f;
    c.decisions = false;
    const auto off = sim::run(c);
    bool stalled_after_window = false;
    for (const auto& cv : off.verdicts.clients) stalled_after_window = stalled_after_window || cv.stalled;
    o.require(off.verdicts.safety_ok() && stalled_after_window && !off.verdicts.responsive(),
              fmt::format("f={} decisions off: clients stalled past {} ms", f, c.stall_window() / kMillisecond));
    c.decisions = true;
    const auto on = sim::run(c);
    o.require(on.verdicts.safety_ok() && on.verdicts.responsive(),
              fmt::format("f={} decisions on: all clients completed ({} ops)", f, on.ops_completed));
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  struct Variant {
    const char* script;
    bool leak;
  };
  for (const auto& v : {Variant{"equivocate_withhold", false}, Variant{"equivocate_withhold", true},
                        Variant{"gap_forever", false}}) {
    sim::ExploreOptions opt;
    opt.config = sim::small_model_config(v.script, v.leak);
    const auto start = std::chrono::steady_clock::now();
    const auto r = sim::explore(opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool crosses = !v.leak || r.view_change_states > 0;
    o.require(r.complete() && r.depth_cuts == 0 && r.violations.empty() && crosses,
              fmt::format("explore {}{}: {} states, {} view-change states, {} violations, {:.0f} s", v.script,
                          v.leak ? " (leak)" : "", r.states, r.view_change_states, r.violations.size(), secs));
  }
  for (const char* script : {"equivocate_withhold", "gap_forever"}) {
    for (std::uint32_t f : {1u, 2u, 3u}) {
      const auto r = sim::run_seed_suite(script, f, 1, kSeedsPerCell);
      std::string detail = fmt::format("{} f={}: {} seeds, {} unsafe, {} with a view change", script, f, r.runs,
                                       r.unsafe, r.view_changes);
      if (!r.failures.empty()) detail += "; first: " + r.failures.front();
      o.require(r.runs == kSeedsPerCell && r.unsafe == 0, detail);
    }
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  std::uint64_t runs = 0;
  std::uint64_t duplicates = 0;
  for (const char* script : {"none", "equivocate_withhold", "silent_repliers", "crash_tcs", "gap_forever"}) {
    for (std::uint32_t f : {1u, 2u}) {
      sim::SimConfig c = preset(script);
      c.f = f;
      c.mode = protocol::Mode::prevention;
      const auto t = sim::run(c);
      ++runs;
      duplicates += context_duplicates(t);
    }
  }
  for (std::uint32_t f : {1u, 2u, 3u}) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      for (const char* script : {"equivocate_withhold", "gap_forever"}) {
        sim::SimConfig c = sim::random_suite_config(script, f, seed);
        c.mode = protocol::Mode::prevention;
        const auto t = sim::run(c);
        ++runs;
        duplicates += context_duplicates(t);
      }
    }
  }
  o.require(duplicates == 0, fmt::format("certificate scan over {} prevention runs: {} duplicate contexts", runs,
                                         duplicates));

  sim::SimConfig c = preset("equivocate_withhold");
  c.mode = protocol::Mode::prevention;
  const auto t = sim::run(c);
  o.require(has_highlight(t, "EquivocationRefused") && t.verdicts.safety_ok(),
            "equivocating leader's second certify for one context is refused in a run");

  tc::AdminConsole admin(crypto::sha256("acceptance"), tc::CertMode::sig, 1);
  auto component = admin.deploy({0, tc::CertMode::sig, tc::CounterPolicy::strict, 1000}, 1, true);
  component.certify({tc::Phase::prepare, 0, 1}, crypto::sha256("a"));
  tc::TcErrc code = tc::TcErrc::invalid_argument;
  try {
    component.certify({tc::Phase::prepare, 0, 1}, crypto::sha256("b"));
  } catch (const tc::TcError& e) {
    code = e.code();
  }
  o.require(code == tc::TcErrc::equivocation_refused, "duplicate-context certify returns EquivocationRefused");
  return o;
}

Outcome criterion7() {
  Outcome o;
  sim::SimConfig c = preset("counter_identity");
  const auto vulnerable = sim::run(c);
  o.require(!vulnerable.verdicts.safety_ok(),
            fmt::format("vulnerable component, announced counters: {}",
                        vulnerable.verdicts.safety.empty() ? "no violation" : vulnerable.verdicts.safety.front()));
  c.vulnerable_tc = false;
  const auto strict = sim::run(c);
  o.require(strict.verdicts.safety_ok(), "strict component: no violation");
  c.vulnerable_tc = true;
  c.counter_acceptance = protocol::CounterAcceptance::pinned;
  const auto pinned = sim::run(c);
  o.require(pinned.verdicts.safety_ok(), "vulnerable component, pinned counter identity: no violation");
  return o;
}

Outcome criterion8() {
  Outcome o;
  for (std::uint32_t f : {1u, 2u}) {
    sim::SimConfig c = preset("crash_tcs");
    c.f = f;
    c.script.params = {{"k", f}};
    const auto within = sim::run(c);
    o.require(within.verdicts.safety_ok() && within.verdicts.responsive(),
              fmt::format("f={} k={}: all clients completed", f, f));
    c.script.params = {{"k", f + 1}};
    const auto beyond = sim::run(c);
    o.require(beyond.verdicts.safety_ok() && !beyond.verdicts.liveness_ok(),
              fmt::format("f={} k={}: liveness lost, safety intact", f, f + 1));
    c.script.params = {{"k", f + 1}, {"restore_one", true}};
    const auto restored = sim::run(c);
    o.require(restored.verdicts.safety_ok() && restored.verdicts.liveness_ok() &&
                  restored.ops_completed > beyond.ops_completed,
              fmt::format("f={} k={} with one snapshot restored: live again ({} vs {} ops)", f, f + 1,
                          restored.ops_completed, beyond.ops_completed));
    c.script.params = {{"k", f + 1}, {"restart", true}};
    const auto restarted = sim::run(c);
    o.require(restarted.verdicts.safety_ok() && !restarted.verdicts.liveness_ok() &&
                  has_highlight(restarted, "stale trusted component epoch"),
              fmt::format("f={} k={} restarted without restore: certificates rejected as stale, no progress", f,
                          f + 1));
  }
  tc::AdminConsole admin(crypto::sha256("acceptance"), tc::CertMode::sig, 2);
  auto original = admin.deploy({0, tc::CertMode::sig, tc::CounterPolicy::strict, 1000}, 1, true);
  auto verifier = admin.deploy({1, tc::CertMode::sig, tc::CounterPolicy::strict, 1000}, 1, true);
  original.create_ui(crypto::sha256("a"));
  original.crash();
  auto fresh = admin.deploy({0, tc::CertMode::sig, tc::CounterPolicy::strict, 1000}, 2, false);
  const auto ui = fresh.create_ui(crypto::sha256("b"));
  o.require(tc::verify(ui, crypto::sha256("b"), admin.directory(), verifier) == tc::VerifyStatus::stale_epoch,
            "certificate from a restarted component verifies as StaleEpoch");
  return o;
}

Outcome criterion9() {
  Outcome o;
  std::ostringstream out;
  cli::cmd_table1(out, true);
  const json j = json::parse(out.str());
  const std::vector<std::vector<std::string>> expected{
      {"PBFT", "6f", "1+2f", "0"},   {"Flexi-BFT", "3f", "1+2f", "1"}, {"MinBFT", "2f", "1+f", "2"},
      {"Zyzzyva", "3f", "1+1", "0"}, {"Flexi-ZZ", "3f", "1+1", "1"},   {"MinZZ", "2f", "1+1", "2"},
  };
  bool rows_ok = j.at("rows").size() == expected.size();
  for (std::size_t i = 0; rows_ok && i < expected.size(); ++i) {
    const auto& row = j.at("rows")[i];
    rows_ok = row.at("protocol") == expected[i][0] && row.at("leader_msgs") == expected[i][1] &&
              row.at("crypto") == expected[i][2] && row.at("tc_accesses") == expected[i][3];
  }
  o.require(rows_ok, "table1 rows match all six protocols symbolically");
  const auto one = cost::leader_bandwidth_ratio(1);
  o.require(one.num == 1 && one.den == 3, "leader bandwidth ratio at f=1 is 1/3");
  const double large = cost::leader_bandwidth_ratio(1'000'000).value();
  o.require(std::abs(large - 0.5) < 1e-5, fmt::format("leader bandwidth ratio at f=1e6 is {:.7f}", large));
  const double ratio = j.at("verification_ratio_flexibft_over_minbft").get<double>();
  o.require(std::abs(ratio - 2.0) < 1e-12, fmt::format("Flexi-BFT over MinBFT verifications: {}", ratio));
  return o;
}

Outcome criterion10() {
  Outcome o;
  const auto root = std::filesystem::temp_directory_path() / "tcbft_acceptance_determinism";
  std::filesystem::remove_all(root);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::vector<std::pair<std::string, sim::SimConfig>> configs;
  for (const char* script :
       {"none", "equivocate_withhold", "counter_identity", "silent_repliers", "crash_tcs", "gap_forever"}) {
    configs.emplace_back(script, cli::attack_preset(script));
  }
  sim::SimConfig prevention = cli::attack_preset("equivocate_withhold");
  prevention.mode = protocol::Mode::prevention;
  configs.emplace_back("equivocate_withhold/prevention", prevention);
  sim::SimConfig lossy = sim::random_suite_config("gap_forever", 2, 11);
  lossy.drop_rate = 0.05;
  lossy.trace = true;
  configs.emplace_back("gap_forever/lossy", lossy);
  std::size_t i = 0;
  for (const auto& [name, config] : configs) {
    const auto a = root / fmt::format("{}a", i);
    const auto b = root / fmt::format("{}b", i);
    cli::write_run_files(sim::run(config), a);
    cli::write_run_files(sim::run(config), b);
    const std::string ta = read(a / "trace.jsonl");
    const bool same = !ta.empty() && ta == read(b / "trace.jsonl") && read(a / "summary.json") == read(b / "summary.json");
    o.require(same, fmt::format("{}: rerun trace.jsonl byte-identical ({} bytes)", name, ta.size()));
    ++i;
  }
  std::filesystem::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"overhead reproduction at B=500", criterion1},
      {"zero decisions when delta covers a round trip", criterion2},
      {"byte overheads with one calibrated size model", criterion3},
      {"responsiveness dichotomy under silent repliers", criterion4},
      {"safety suite: exhaustive small model and random seeds", criterion5},
      {"prevention mode never certifies a context twice", criterion6},
      {"counter identity attack dichotomy", criterion7},
      {"trusted component crash semantics", criterion8},
      {"protocol cost table and ratios", criterion9},
      {"determinism of reruns", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.require(false, fmt::format("threw: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& note : outcome.notes) std::cout << "    " << note << "\n";
    std::cout << fmt::format("criterion {}: {} ({}, {:.1f} s)\n", i + 1, outcome.pass ? "PASS" : "FAIL",
                             criteria[i].first, secs)
              << std::flush;
    if (!outcome.pass) ++failed;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
