#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <iostream>

#include "tcbft/cli/commands.hpp"

using namespace tcbft;

namespace {

// Unrecognised "--sim.path=value" arguments become config overrides.
std::vector<std::string> sim_overrides(const CLI::App& sub) {
  std::vector<std::string> out;
  const auto extras = sub.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--sim.", 0) != 0) throw cli::UsageError(fmt::format("unknown argument '{}'", arg));
    std::string body = arg.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) throw cli::UsageError(fmt::format("'{}' needs a value", arg));
      body += "=" + extras[++i];
    }
    out.push_back(body);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TC-based BFT replication: simulator, cost model and experiments"};
  app.require_subcommand(1);

  cli::RunOptions run;
  std::uint64_t run_seed = 0;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "simulate one configuration and write trace and summary files");
  run_cmd->add_option("config", run.config_path, "JSON config file (defaults when omitted)");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "PRNG seed");
  run_cmd->add_option("--out", run_out, "output directory (default $TCBFT_OUT_DIR or ./out)");
  run_cmd->add_flag("--expect-violation", run.expect_violation, "succeed only if safety is violated");
  run_cmd->allow_extras();

  cli::OverheadOptions overhead;
  bool bytes = false;
  std::string overhead_csv;
  auto* overhead_cmd = app.add_subcommand("overhead", "decision overhead: model next to simulation");
  overhead_cmd->add_option("--f-list", overhead.f_list, "fault thresholds")->delimiter(',');
  overhead_cmd->add_option("--b-list", overhead.b_list, "batch sizes")->delimiter(',');
  overhead_cmd->add_option("--batches", overhead.batches, "batches per run");
  overhead_cmd->add_flag("--bytes", bytes, "also sweep 1024-byte transactions");
  overhead_cmd->add_option("--csv", overhead_csv, "also write the CSV here");

  bool table_json = false;
  auto* table_cmd = app.add_subcommand("table1", "normal-case resource costs of six protocols");
  table_cmd->add_flag("--json", table_json, "machine-readable output");

  cli::AttackOptions attack;
  std::optional<std::uint32_t> attack_f;
  std::optional<std::uint64_t> attack_k;
  std::optional<std::uint64_t> attack_seed;
  std::string attack_decisions;
  std::string attack_out;
  auto* attack_cmd = app.add_subcommand("attack", "run a scripted scenario and narrate it");
  attack_cmd->add_option("script", attack.script, "scenario name")->required();
  attack_cmd->add_option("--f", attack_f, "fault threshold");
  attack_cmd->add_option("--k", attack_k, "trusted components to stop (crash_tcs)");
  attack_cmd->add_option("--decisions", attack_decisions, "on or off")->check(CLI::IsMember({"on", "off"}));
  attack_cmd->add_option("--seed", attack_seed, "PRNG seed");
  attack_cmd->add_option("--out", attack_out, "also write run files and the narrative here");
  attack_cmd->add_flag("--expect-violation", attack.expect_violation, "succeed only if safety is violated");
  attack_cmd->allow_extras();

  cli::SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "analytic overhead sweep in the tally CSV schema");
  sweep_cmd->add_option("--f-list", sweep.f_list, "fault thresholds")->delimiter(',');
  sweep_cmd->add_option("--b-list", sweep.b_list, "batch sizes")->delimiter(',');
  sweep_cmd->add_option("--tx", sweep.tx, "transaction bytes");
  sweep_cmd->add_option("--batches", sweep.batches, "batches per run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  try {
    if (*run_cmd) {
      if (*seed_opt) run.seed = run_seed;
      run.out = run_out;
      run.overrides = sim_overrides(*run_cmd);
      return cli::cmd_run(run, std::cout);
    }
    if (*overhead_cmd) {
      if (bytes) overhead.tx_list = {256, 1024};
      if (!overhead_csv.empty()) overhead.csv = overhead_csv;
      return cli::cmd_overhead(overhead, std::cout);
    }
    if (*table_cmd) return cli::cmd_table1(std::cout, table_json);
    if (*attack_cmd) {
      if (attack_f) attack.overrides.push_back(fmt::format("f={}", *attack_f));
      if (attack_k) attack.overrides.push_back(fmt::format("script.params.k={}", *attack_k));
      if (attack_seed) attack.overrides.push_back(fmt::format("seed={}", *attack_seed));
      if (!attack_decisions.empty()) {
        attack.overrides.push_back(fmt::format("decisions={}", attack_decisions == "on" ? "true" : "false"));
      }
      for (auto& o : sim_overrides(*attack_cmd)) attack.overrides.push_back(std::move(o));
      if (!attack_out.empty()) attack.out = attack_out;
      return cli::cmd_attack(attack, std::cout);
    }
    if (*sweep_cmd) return cli::cmd_sweep(sweep, std::cout);
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const sim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kUsage;
  }
  return cli::kUsage;
}
