#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tcbft/cli/commands.hpp"
#include "tcbft/cli/report.hpp"

using namespace tcbft;
using namespace tcbft::cli;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tcbft_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::SimConfig small() {
  sim::SimConfig c;
  c.clients = 2;
  c.duration = 500 * kMillisecond;
  c.tc_mode = tc::CertMode::hmac;
  return c;
}

}  // namespace

TEST_CASE("run writes the four output files with their headers") {
  const auto dir = scratch_dir("run");
  RunOptions o;
  o.out = dir;
  o.overrides = {"duration_ms=300", "clients=2", "tc_mode=hmac"};
  std::ostringstream out;
  CHECK(cmd_run(o, out) == kOk);
  for (const char* name : {"trace.jsonl", "summary.json", "tallies.csv", "latency.csv"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  CHECK(first_line(slurp(dir / "tallies.csv")) == kTallyHeader);
  CHECK(first_line(slurp(dir / "latency.csv")) == "client,seq,submit_t,complete_t");
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("verdicts").at("safety") == "ok");
  CHECK(summary.contains("tally"));
  std::istringstream lines(slurp(dir / "trace.jsonl"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    CHECK(json::accept(line));
    ++count;
  }
  CHECK(count > 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("expecting a violation on a safe run is a verdict failure") {
  const auto dir = scratch_dir("expect");
  RunOptions o;
  o.out = dir;
  o.overrides = {"duration_ms=200", "tc_mode=hmac"};
  o.expect_violation = true;
  std::ostringstream out;
  CHECK(cmd_run(o, out) == kVerdictFailure);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bad configs are usage errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json", {}), UsageError);
  const auto dir = scratch_dir("badjson");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_config((dir / "bad.json").string(), {}), UsageError);
  CHECK_THROWS_AS(load_config("", {"bogus=1"}), sim::ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unknown attack scripts are usage errors") {
  CHECK_THROWS_AS(attack_preset("teleport"), UsageError);
  for (const char* s : {"none", "equivocate_withhold", "counter_identity", "silent_repliers", "crash_tcs", "gap_forever"}) {
    CHECK_NOTHROW(attack_preset(s));
  }
}

TEST_CASE("counter identity attack exits by its expected verdict") {
  AttackOptions o;
  o.script = "counter_identity";
  o.overrides = {"duration_ms=800", "tc_mode=hmac"};
  std::ostringstream out;
  CHECK(cmd_attack(o, out) == kVerdictFailure);
  CHECK(out.str().find("safety violated") != std::string::npos);
  o.expect_violation = true;
  std::ostringstream again;
  CHECK(cmd_attack(o, again) == kOk);
}

TEST_CASE("crash narrative separates lost liveness from safety") {
  AttackOptions o;
  o.script = "crash_tcs";
  o.overrides = {"script.params.k=2", "tc_mode=hmac", "duration_ms=1500"};
  std::ostringstream out;
  CHECK(cmd_attack(o, out) == kOk);
  const std::string text = out.str();
  CHECK(text.find("liveness lost, safety preserved") != std::string::npos);
  CHECK(text.find("trusted component of replica 1 stops") != std::string::npos);
}

TEST_CASE("silent repliers narrative shows stalled clients") {
  AttackOptions o;
  o.script = "silent_repliers";
  o.overrides = {"tc_mode=hmac", "duration_ms=1500"};
  std::ostringstream off;
  CHECK(cmd_attack(o, off) == kOk);
  CHECK(off.str().find("stalled on request") != std::string::npos);
  o.overrides.push_back("decisions=true");
  std::ostringstream on;
  CHECK(cmd_attack(o, on) == kOk);
  CHECK(on.str().find("all clients completed, safety preserved") != std::string::npos);
}

TEST_CASE("table1 json carries rows and ratios") {
  std::ostringstream out;
  CHECK(cmd_table1(out, true) == kOk);
  const json j = json::parse(out.str());
  CHECK(j.at("rows").size() == 6);
  CHECK(j.at("rows")[2].at("protocol") == "MinBFT");
  CHECK(j.at("rows")[2].at("crypto") == "1+f");
  CHECK(j.at("leader_bandwidth_ratio")[0].at("num") == 1);
  CHECK(j.at("leader_bandwidth_ratio")[0].at("den") == 3);
  CHECK(j.at("verification_ratio_flexibft_over_minbft").get<double>() == doctest::Approx(2.0));
}

TEST_CASE("overhead command agrees with the model on small cells") {
  OverheadOptions o;
  o.f_list = {1, 2};
  o.b_list = {1, 10};
  std::ostringstream out;
  CHECK(cmd_overhead(o, out) == kOk);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == kOverheadHeader);
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 14);
    CHECK(cells[7] == "0");
    CHECK(cells[8] == cells[9]);
  }
  CHECK(rows == 4);
  o.f_list.clear();
  CHECK_THROWS_AS(cmd_overhead(o, out), UsageError);
}

TEST_CASE("sweep rows follow the tally header") {
  SweepOptions o;
  o.f_list = {10};
  o.b_list = {500};
  std::ostringstream out;
  CHECK(cmd_sweep(o, out) == kOk);
  std::istringstream lines(out.str());
  std::string header, off, on;
  std::getline(lines, header);
  std::getline(lines, off);
  std::getline(lines, on);
  CHECK(header == kTallyHeader);
  CHECK(off.rfind("10,21,500,0,0,", 0) == 0);
  CHECK(on.rfind("10,21,500,0,1,", 0) == 0);
  CHECK(on.find("0.017740") != std::string::npos);
}

TEST_CASE("tally row leaves overhead columns empty without a baseline") {
  const auto t = sim::run(small());
  const std::string row = tally_row(t);
  CHECK(row.size() > 2);
  CHECK(row.substr(row.size() - 2) == ",,");
}
