#include "tcbft/sim/suite.hpp"

#include <fmt/format.h>

#include <random>

#include "tcbft/sim/world.hpp"

namespace tcbft::sim {

SimConfig random_suite_config(const std::string& script, std::uint32_t f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };

  SimConfig c;
  c.f = f;
  c.seed = seed;
  c.tc_mode = tc::CertMode::hmac;
  c.trace = false;
  c.duration = 1200 * kMillisecond;
  c.clients = static_cast<std::uint32_t>(pick(1, 4));
  c.batch_size = static_cast<std::uint32_t>(pick(1, 3));
  c.mode = pick(0, 3) == 0 ? protocol::Mode::prevention : protocol::Mode::detection;
  c.decisions = pick(0, 1) == 1;
  c.delta = pick(0, 8) * kMillisecond;
  c.pipelining = pick(0, 3) != 0;
  c.pipeline_depth = static_cast<std::uint32_t>(pick(1, 8));
  c.checkpoint_interval = pick(0, 2) == 0 ? 0 : pick(5, 40);
  c.delay_min = kMillisecond;
  c.delay_max = pick(1, 10) * kMillisecond;
  c.drop_rate = pick(0, 4) == 0 ? 0.02 : 0.0;
  c.script.name = script;
  if (script == "equivocate_withhold") {
    c.script.params = {{"x_value", pick(1, 15)}, {"gap", pick(1, 6)}, {"leak", pick(0, 3) == 0}};
  } else if (script == "gap_forever") {
    c.script.params = {{"x_value", pick(1, 15)}};
  }
  return c;
}

SuiteResult run_seed_suite(const std::string& script, std::uint32_t f, std::uint64_t first, std::uint64_t count) {
  SuiteResult result;
  for (std::uint64_t seed = first; seed < first + count; ++seed) {
    const Trace t = run(random_suite_config(script, f, seed));
    ++result.runs;
    for (const auto& r : t.replicas) {
      if (!r.faulty && r.view > 0) {
        ++result.view_changes;
        break;
      }
    }
    if (!t.verdicts.safety_ok()) {
      ++result.unsafe;
      if (result.failures.size() < 5) result.failures.push_back(fmt::format("seed {}: {}", seed, t.verdicts.safety.front()));
    }
  }
  return result;
}

}  // namespace tcbft::sim
