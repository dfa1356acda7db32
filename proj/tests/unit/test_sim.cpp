#include <algorithm>

#include "doctest.h"
#include "tcbft/sim/explorer.hpp"
#include "tcbft/sim/measure.hpp"
#include "tcbft/sim/suite.hpp"
#include "tcbft/sim/world.hpp"

using namespace tcbft;
using namespace tcbft::sim;
using nlohmann::json;

namespace {

SimConfig quick(const std::string& script = "none") {
  SimConfig c;
  c.script.name = script;
  c.clients = 2;
  c.duration = 1500 * kMillisecond;
  c.tc_mode = tc::CertMode::hmac;
  return c;
}

bool left_view_zero(const Trace& t) {
  return std::any_of(t.replicas.begin(), t.replicas.end(), [](const auto& r) { return !r.faulty && r.view > 0; });
}

}  // namespace

TEST_CASE("config json round trip is lossless") {
  SimConfig c = quick("crash_tcs");
  c.f = 3;
  c.delta = 3 * kMillisecond;
  c.script.params = {{"k", 2}};
  c.partitions.push_back({kMillisecond, 2 * kMillisecond, {{1}, {2, 3}}});
  const json j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"f", "three"}}), std::exception);
  SimConfig c;
  c.f = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.delay_min = 5 * kMillisecond;
  c.delay_max = kMillisecond;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("dotted overrides create nested objects and parse JSON values") {
  json j = json::object();
  apply_override(j, "script.name=crash_tcs");
  apply_override(j, "script.params.k=2");
  apply_override(j, "f=2");
  const SimConfig c = config_from_json(j);
  CHECK(c.script.name == "crash_tcs");
  CHECK(c.script.params.at("k") == 2);
  CHECK(c.f == 2);
  CHECK_THROWS(apply_override(j, "no_equals_sign"));
}

TEST_CASE("same seed gives the same event stream, another seed does not") {
  const SimConfig c = quick();
  const Trace a = run(c);
  const Trace b = run(c);
  CHECK(a.events == b.events);
  CHECK(a.ops_completed == b.ops_completed);
  SimConfig other = c;
  other.seed = c.seed + 1;
  CHECK(run(other).events != a.events);
}

TEST_CASE("fault-free run is safe, live and responsive") {
  const Trace t = run(quick());
  CHECK(t.verdicts.safety_ok());
  CHECK(t.verdicts.liveness_ok());
  CHECK(t.verdicts.termination_ok());
  CHECK(t.verdicts.responsive());
  CHECK(t.ops_completed > 100);
  CHECK_FALSE(left_view_zero(t));
}

TEST_CASE("simulated message counts equal the analytic model") {
  for (std::uint32_t f : {1u, 2u, 3u, 10u}) {
    for (std::uint32_t b : {1u, 10u, 100u, 500u}) {
      CAPTURE(f);
      CAPTURE(b);
      const auto row = overhead_row(f, b, 2);
      CHECK(row.msg_diff() == 0);
      CHECK(row.simulated.with.msgs_decision == row.model_with.decisions);
      CHECK(row.simulated.without.msgs_decision == 0);
      CHECK(row.simulated.msgs == doctest::Approx(row.model_msgs).epsilon(1e-12));
      CHECK(row.simulated.bytes == doctest::Approx(row.model_bytes).epsilon(1e-12));
    }
  }
}

TEST_CASE("no decisions when delta covers a round trip and batches are sequential") {
  for (std::uint32_t f : {1u, 2u, 3u}) {
    CAPTURE(f);
    SimConfig c = quick();
    c.f = f;
    c.pipelining = false;
    c.delay_max = 4 * kMillisecond;
    c.delta = 2 * c.delay_max;
    const Trace t = run(c);
    CHECK(t.ops_completed > 0);
    CHECK(t.tally.of(protocol::MsgKind::decision) == 0);
    CHECK(t.verdicts.safety_ok());
  }
}

TEST_CASE("measure refuses traces that differ beyond the decisions switch") {
  const Trace with = run(overhead_config(1, 2, 2, true));
  const Trace without = run(overhead_config(1, 2, 2, false));
  CHECK_NOTHROW(measure(with, without));
  CHECK_THROWS_AS(measure(without, with), MeasureError);
  CHECK_THROWS_AS(measure(with, with), MeasureError);
  SimConfig other = overhead_config(1, 2, 2, false);
  other.seed += 1;
  CHECK_THROWS_AS(measure(with, run(other)), MeasureError);
}

TEST_CASE("equivocation in detection mode is caught and the view changes") {
  SimConfig c = quick("equivocate_withhold");
  c.partitions.push_back({100 * kMillisecond, 400 * kMillisecond, {{1}, {2}}});
  const Trace t = run(c);
  CHECK(t.verdicts.safety_ok());
  CHECK(left_view_zero(t));
  CHECK(t.verdicts.liveness_ok());
}

TEST_CASE("equivocation in prevention mode is refused by the trusted component") {
  SimConfig c = quick("equivocate_withhold");
  c.mode = protocol::Mode::prevention;
  const Trace t = run(c);
  CHECK(t.verdicts.safety_ok());
  CHECK(t.verdicts.liveness_ok());
  const bool refused = std::any_of(t.highlights.begin(), t.highlights.end(),
                                   [](const Highlight& h) { return h.text.find("EquivocationRefused") != std::string::npos; });
  CHECK(refused);
}

TEST_CASE("a leader that leaves a counter gap is replaced") {
  const Trace t = run(quick("gap_forever"));
  CHECK(t.verdicts.safety_ok());
  CHECK(left_view_zero(t));
  CHECK(t.verdicts.liveness_ok());
}

TEST_CASE("silent repliers stall n-f clients unless decisions are on") {
  for (std::uint32_t f : {1u, 2u}) {
    CAPTURE(f);
    SimConfig c = quick("silent_repliers");
    c.f = f;
    c.reply_policy = clients::ReplyPolicy::n_minus_f;
    c.decisions = false;
    const Trace off = run(c);
    CHECK(off.verdicts.safety_ok());
    CHECK_FALSE(off.verdicts.responsive());
    c.decisions = true;
    const Trace on = run(c);
    CHECK(on.verdicts.safety_ok());
    CHECK(on.verdicts.responsive());
  }
}

TEST_CASE("counter identity is unsafe only with a vulnerable component and announced counters") {
  SimConfig c = quick("counter_identity");
  c.vulnerable_tc = true;
  c.counter_acceptance = protocol::CounterAcceptance::announced;
  CHECK_FALSE(run(c).verdicts.safety_ok());
  c.counter_acceptance = protocol::CounterAcceptance::pinned;
  CHECK(run(c).verdicts.safety_ok());
  c.vulnerable_tc = false;
  c.counter_acceptance = protocol::CounterAcceptance::announced;
  CHECK(run(c).verdicts.safety_ok());
}

TEST_CASE("crashed trusted components: f keeps going, f+1 halts safely") {
  SimConfig c = quick("crash_tcs");
  c.script.params = {{"k", 1}};
  const Trace one = run(c);
  CHECK(one.verdicts.safety_ok());
  CHECK(one.verdicts.responsive());

  c.script.params = {{"k", 2}};
  const Trace two = run(c);
  CHECK(two.verdicts.safety_ok());
  CHECK_FALSE(two.verdicts.liveness_ok());

  // Doubling view-change timeouts put recovery past the short horizon.
  c.duration = 3000 * kMillisecond;
  const Trace two_long = run(c);
  c.script.params = {{"k", 2}, {"restore_one", true}, {"restore_at_ms", 900}};
  const Trace restored = run(c);
  CHECK(restored.verdicts.safety_ok());
  CHECK(restored.ops_completed > two_long.ops_completed);

  c.script.params = {{"k", 2}, {"restart", true}};
  const Trace restarted = run(c);
  CHECK(restarted.verdicts.safety_ok());
  CHECK_FALSE(restarted.verdicts.liveness_ok());
}

TEST_CASE("random suite configs are reproducible and runs stay safe") {
  CHECK(config_to_json(random_suite_config("gap_forever", 1, 7)) ==
        config_to_json(random_suite_config("gap_forever", 1, 7)));
  CHECK(config_to_json(random_suite_config("gap_forever", 1, 7)) !=
        config_to_json(random_suite_config("gap_forever", 1, 8)));
  for (const char* script : {"equivocate_withhold", "gap_forever"}) {
    const auto r = run_seed_suite(script, 1, 1, 10);
    CHECK(r.runs == 10);
    CHECK(r.unsafe == 0);
  }
}

TEST_CASE("explorer finds no violation in the small equivocation model") {
  ExploreOptions o;
  o.config = small_model_config("equivocate_withhold");
  const auto r = explore(o);
  CHECK(r.complete());
  CHECK(r.depth_cuts == 0);
  CHECK(r.violations.empty());
  CHECK(r.states > 1000);
}

TEST_CASE("explorer reports the counter identity attack") {
  ExploreOptions o;
  o.config = small_model_config("counter_identity");
  o.config.vulnerable_tc = true;
  o.config.counter_acceptance = protocol::CounterAcceptance::announced;
  o.max_states = 20'000;
  const auto r = explore(o);
  CHECK_FALSE(r.violations.empty());
}

TEST_CASE("world copies evolve independently") {
  World a(quick());
  for (int i = 0; i < 50; ++i) a.step();
  World b(a);
  CHECK(a.fingerprint() == b.fingerprint());
  b.step();
  CHECK(a.fingerprint() != b.fingerprint());
}
