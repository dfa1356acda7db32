#include <functional>
#include <map>
#include <set>
#include <type_traits>

#include "doctest.h"
#include "tcbft/core/crypto.hpp"
#include "tcbft/sim/tc_bank.hpp"
#include "tcbft/tc/admin.hpp"

using namespace tcbft;
using namespace tcbft::tc;

namespace {

Digest h(std::string_view s) { return crypto::sha256(s); }

struct Deployment {
  AdminConsole admin;
  TrustedComponent tc;
  TrustedComponent peer;

  explicit Deployment(CertMode mode, CounterPolicy policy = CounterPolicy::strict, std::uint64_t window = 1000)
      : admin(h("system"), mode, 2),
        tc(admin.deploy({0, mode, policy, window}, 1, true)),
        peer(admin.deploy({1, mode, policy, window}, 1, true)) {}
};

TcErrc error_of(const std::function<void()>& call) {
  try {
    call();
  } catch (const TcError& e) {
    return e.code();
  }
  FAIL("expected TcError");
  return TcErrc::invalid_argument;
}

}  // namespace

TEST_CASE("usig values start at one and never repeat") {
  Deployment d(CertMode::sig);
  auto first = d.tc.create_ui(h("a"));
  auto second = d.tc.create_ui(h("a"));
  CHECK(first.value == 1);
  CHECK(second.value == 2);
  CHECK(verify(first, h("a"), d.admin.directory(), d.peer) == VerifyStatus::valid);
  CHECK(verify(first, h("b"), d.admin.directory(), d.peer) == VerifyStatus::invalid);
}

TEST_CASE("conflicting statements around seven intervening certifications get 47 and 55") {
  Deployment d(CertMode::hmac);
  for (int i = 0; i < 46; ++i) d.tc.create_ui(h("filler"));
  auto x = d.tc.create_ui(h("x"));
  for (int i = 0; i < 7; ++i) d.tc.create_ui(h("other"));
  auto y = d.tc.create_ui(h("y"));
  CHECK(x.value == 47);
  CHECK(y.value == 55);
}

TEST_CASE("signature verification never touches the verifier's component") {
  Deployment d(CertMode::sig);
  std::vector<UniqueIdentifier> uis;
  for (int i = 0; i < 1000; ++i) uis.push_back(d.tc.create_ui(h(std::to_string(i))));
  auto before = d.peer.access_count();
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(verify(uis[i], h(std::to_string(i)), d.admin.directory(), d.peer) == VerifyStatus::valid);
  }
  CHECK(d.peer.access_count() == before);
}

TEST_CASE("mac verification costs exactly one access") {
  Deployment d(CertMode::hmac);
  auto ui = d.tc.create_ui(h("m"));
  auto before = d.peer.access_count();
  CHECK(verify(ui, h("m"), d.admin.directory(), d.peer) == VerifyStatus::valid);
  CHECK(d.peer.access_count() == before + 1);
}

TEST_CASE("skip voids a range and the next value follows it") {
  Deployment d(CertMode::hmac);
  for (int i = 0; i < 10; ++i) d.tc.create_ui(h("f"));
  auto s = d.tc.skip(5);
  CHECK(s.from.value == 11);
  CHECK(s.to.value == 16);
  CHECK(s.highest_certified == 10);
  CHECK(s.voids({0, 11}));
  CHECK(s.voids({0, 15}));
  CHECK_FALSE(s.voids({0, 16}));
  CHECK(verify(s, d.admin.directory(), d.peer) == VerifyStatus::valid);
  CHECK(d.tc.create_ui(h("n")).value == 16);
  CHECK(error_of([&] { d.tc.skip(0); }) == TcErrc::invalid_argument);
}

TEST_CASE("window bounds creation and skipping") {
  Deployment d(CertMode::hmac, CounterPolicy::strict, 4);
  for (int i = 0; i < 4; ++i) d.tc.create_ui(h("w"));
  CHECK(error_of([&] { d.tc.create_ui(h("w")); }) == TcErrc::window_exceeded);
  CHECK(error_of([&] { d.tc.skip(1); }) == TcErrc::window_exceeded);
  d.tc.advance_window(2);
  CHECK(d.tc.create_ui(h("w")).value == 5);
  CHECK(error_of([&] { d.tc.skip(2); }) == TcErrc::window_exceeded);
}

TEST_CASE("prevention refuses duplicate contexts") {
  Deployment d(CertMode::sig);
  d.tc.certify({Phase::prepare, 1, 1}, h("x"));
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 1, 1}, h("y")); }) == TcErrc::equivocation_refused);
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 1, 1}, h("x")); }) == TcErrc::equivocation_refused);
}

TEST_CASE("phase counters are independent") {
  Deployment d(CertMode::hmac);
  for (Seq s = 1; s <= 4; ++s) {
    d.tc.certify({Phase::prepare, 1, s}, h("p"));
    d.tc.certify({Phase::commit, 1, s}, h("c"));
  }
  auto p = d.tc.certify({Phase::prepare, 1, 5}, h("p5"));
  auto c = d.tc.certify({Phase::commit, 1, 5}, h("c5"));
  CHECK(p.context->phase == Phase::prepare);
  CHECK(c.context->phase == Phase::commit);
  CHECK(verify(c, h("c5"), d.admin.directory(), d.peer) == VerifyStatus::valid);
}

TEST_CASE("prevention order needs an explicit skip") {
  Deployment d(CertMode::hmac);
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 1, 2}, h("a")); }) == TcErrc::out_of_order);
  d.tc.certify({Phase::prepare, 1, 1}, h("a"));
  d.tc.skip_to(Phase::prepare, 1, 4);
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 1, 3}, h("b")); }) == TcErrc::equivocation_refused);
  CHECK(d.tc.certify({Phase::prepare, 1, 4}, h("b")).value == 4);
  CHECK(d.tc.certify({Phase::prepare, 2, 5}, h("c")).value == 5);
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 3, 1}, h("c")); }) == TcErrc::out_of_order);
  d.tc.skip_to(Phase::prepare, 3, 1);
  CHECK(d.tc.certify({Phase::prepare, 3, 1}, h("c")).value == 1);
  CHECK(error_of([&] { d.tc.certify({Phase::prepare, 1, 5}, h("d")); }) == TcErrc::equivocation_refused);
}

TEST_CASE("counter creation is gated by policy") {
  Deployment strict(CertMode::sig);
  CHECK(error_of([&] { strict.tc.create_counter(); }) == TcErrc::mode_violation);

  Deployment weak(CertMode::sig, CounterPolicy::vulnerable);
  auto q = weak.tc.create_counter();
  auto q2 = weak.tc.create_counter();
  CHECK(q != q2);
  auto t = weak.tc.create_ui(q, h("T"));
  auto t2 = weak.tc.create_ui(q2, h("T'"));
  CHECK(t.value == 1);
  CHECK(t2.value == 1);
  CHECK(verify(t, h("T"), weak.admin.directory(), weak.peer) == VerifyStatus::valid);
  CHECK(verify(t2, h("T'"), weak.admin.directory(), weak.peer) == VerifyStatus::valid);
  CHECK(error_of([&] { weak.tc.create_ui(CounterId{12345}, h("z")); }) == TcErrc::unknown_counter);
}

TEST_CASE("snapshot and restore continue the timeline once") {
  Deployment d(CertMode::sig);
  for (int i = 0; i < 100; ++i) d.tc.create_ui(h("s"));
  auto blob = d.admin.snapshot(d.tc);
  CHECK_FALSE(d.tc.alive());
  CHECK(error_of([&] { d.tc.create_ui(h("late")); }) == TcErrc::unavailable);

  auto fresh = d.admin.deploy({0, CertMode::sig, CounterPolicy::strict, 1000}, 2, false);
  d.admin.restore(fresh, blob);
  auto next = fresh.create_ui(h("after"));
  CHECK(next.value == 101);
  CHECK(next.tc.epoch == 1);
  CHECK(verify(next, h("after"), d.admin.directory(), d.peer) == VerifyStatus::valid);

  auto other = d.admin.deploy({0, CertMode::sig, CounterPolicy::strict, 1000}, 3, false);
  CHECK(error_of([&] { d.admin.restore(other, blob); }) == TcErrc::restore_refused);
}

TEST_CASE("restore into a used component is refused") {
  Deployment d(CertMode::hmac);
  d.tc.create_ui(h("a"));
  auto blob = d.admin.snapshot(d.tc);
  d.peer.create_ui(h("b"));
  CHECK(error_of([&] { d.admin.restore(d.peer, blob); }) == TcErrc::restore_refused);
}

TEST_CASE("restart without restore starts a stale timeline") {
  Deployment d(CertMode::sig);
  d.tc.create_ui(h("a"));
  d.tc.crash();
  CHECK(error_of([&] { d.tc.create_ui(h("b")); }) == TcErrc::unavailable);
  auto restarted = d.admin.deploy({0, CertMode::sig, CounterPolicy::strict, 1000}, 2, false);
  auto ui = restarted.create_ui(h("b"));
  CHECK(ui.value == 1);
  CHECK(verify(ui, h("b"), d.admin.directory(), d.peer) == VerifyStatus::stale_epoch);
}

TEST_CASE("a2m positions are unique and truncation hides old entries") {
  Deployment d(CertMode::sig);
  auto log = d.admin.deploy_log(0, 8);
  auto e1 = log.append(h("h1"));
  auto e2 = log.append(h("h2"));
  CHECK(e1.position == 1);
  CHECK(e2.position == 2);
  CHECK(verify_log_entry(e2.attestation, 2, h("h2"), d.admin.directory(), d.peer) == VerifyStatus::valid);
  CHECK(verify_log_entry(e2.attestation, 1, h("h2"), d.admin.directory(), d.peer) == VerifyStatus::invalid);
  log.truncate(2);
  CHECK(log.lookup(1).status == A2mLog::LookupStatus::truncated);
  CHECK(log.lookup(2).status == A2mLog::LookupStatus::truncated);
  CHECK(log.lookup(3).status == A2mLog::LookupStatus::unassigned);
  CHECK(log.append(h("h3")).position == 3);
  CHECK(error_of([&] { log.truncate(2); }) == TcErrc::invalid_argument);
}

// The replica-facing surface exposes no key material and no way to set a
// counter; copies are reserved for the simulator.
TEST_CASE("api surface audit") {
  static_assert(!std::is_copy_constructible_v<TrustedComponent>);
  static_assert(!std::is_copy_assignable_v<TrustedComponent>);
  static_assert(!std::is_default_constructible_v<A2mLog>);
  static_assert(!std::is_copy_assignable_v<TrustedComponent>);
  CHECK(true);
}

namespace {

// Depth-first enumeration of every call sequence up to `depth` calls over an
// alphabet of `alphabet` operations. States are copied at each branch.
template <typename State, typename Step>
void explore(const State& state, std::size_t depth, std::size_t alphabet, const Step& step, std::size_t& nodes) {
  if (depth == 0) return;
  for (std::size_t op = 0; op < alphabet; ++op) {
    State next = state;
    step(next, op);
    ++nodes;
    explore(next, depth - 1, alphabet, step, nodes);
  }
}

std::size_t tree_size(std::size_t alphabet, std::size_t depth) {
  std::size_t total = 0, level = 1;
  for (std::size_t d = 0; d < depth; ++d) total += (level *= alphabet);
  return total;
}

}  // namespace

TEST_CASE("model check: usig traces up to length 8") {
  AdminConsole admin(h("mc"), CertMode::hmac, 2);
  auto verifier = admin.deploy({1, CertMode::hmac, CounterPolicy::strict, 6}, 1, true);
  const Digest hashes[2] = {h("h0"), h("h1")};
  struct State {
    sim::TcBank bank;
    std::map<std::uint64_t, Digest> by_value;
    std::vector<SkipAttestation> skips;
    std::uint64_t last = 0;
  };
  State root;
  root.bank.add(admin.deploy({0, CertMode::hmac, CounterPolicy::strict, 6}, 1, true));
  bool ok = true;
  auto expect = [&ok](bool c) { ok = ok && c; };
  std::size_t nodes = 0;
  explore(root, 8, 5, [&](State& st, std::size_t op) {
    auto& tc = st.bank.at(0);
    try {
      switch (op) {
        case 0:
        case 1: {
          auto ui = tc.create_ui(hashes[op]);
          expect(ui.value > st.last);
          st.last = ui.value;
          for (const auto& s : st.skips) expect(!s.voids({0, ui.value}));
          expect(st.by_value.emplace(ui.value, ui.msg_hash).second);
          expect(verify(ui, hashes[op], admin.directory(), verifier) == VerifyStatus::valid);
          break;
        }
        case 2: st.skips.push_back(tc.skip(1)); break;
        case 3: st.skips.push_back(tc.skip(3)); break;
        case 4: tc.advance_window(st.last); break;
      }
    } catch (const TcError& e) {
      expect(e.code() == TcErrc::window_exceeded);
    }
  }, nodes);
  CHECK(ok);
  CHECK(nodes == tree_size(5, 8));
}

TEST_CASE("model check: prevention traces up to length 8") {
  AdminConsole admin(h("mc"), CertMode::hmac, 1);
  struct Call {
    bool skip;
    View view;
    Seq seq;
    int hash;
  };
  const Call calls[] = {
      {false, 1, 1, 0}, {false, 1, 1, 1}, {false, 1, 2, 0}, {false, 2, 1, 1}, {true, 2, 1, 0},
  };
  const Digest hashes[2] = {h("h0"), h("h1")};
  struct State {
    sim::TcBank bank;
    std::set<ContextId> certified;
    std::vector<SkipAttestation> skips;
    Position last{0, 0};
  };
  State root;
  root.bank.add(admin.deploy({0, CertMode::hmac, CounterPolicy::strict, 16}, 1, true));
  bool ok = true;
  auto expect = [&ok](bool c) { ok = ok && c; };
  std::size_t nodes = 0;
  explore(root, 8, 5, [&](State& st, std::size_t op) {
    const Call& c = calls[op];
    try {
      if (c.skip) {
        st.skips.push_back(st.bank.at(0).skip_to(Phase::prepare, c.view, c.seq));
      } else {
        auto ui = st.bank.at(0).certify({Phase::prepare, c.view, c.seq}, hashes[c.hash]);
        expect(st.certified.insert(*ui.context).second);
        Position at{c.view, c.seq};
        expect(st.last < at);
        st.last = at;
        for (const auto& s : st.skips) expect(!s.voids(at));
      }
    } catch (const TcError& e) {
      expect(e.code() == TcErrc::equivocation_refused || e.code() == TcErrc::out_of_order);
    }
  }, nodes);
  CHECK(ok);
  CHECK(nodes == tree_size(5, 8));
}

TEST_CASE("model check: a2m traces up to length 8") {
  AdminConsole admin(h("mc"), CertMode::hmac, 1);
  auto verifier = admin.deploy({0, CertMode::hmac, CounterPolicy::strict, 16}, 1, true);
  const Digest hashes[2] = {h("h0"), h("h1")};
  struct State {
    A2mLog log;
    std::map<std::uint64_t, Digest> seen;
  };
  State root{admin.deploy_log(0, 3), {}};
  bool ok = true;
  auto expect = [&ok](bool c) { ok = ok && c; };
  std::size_t nodes = 0;
  explore(root, 8, 4, [&](State& st, std::size_t op) {
    try {
      switch (op) {
        case 0:
        case 1: {
          auto e = st.log.append(hashes[op]);
          expect(st.seen.emplace(e.position, hashes[op]).second);
          expect(verify_log_entry(e.attestation, e.position, hashes[op], admin.directory(), verifier) ==
                 VerifyStatus::valid);
          break;
        }
        case 2: st.log.truncate(st.log.low_watermark() + 1); break;
        case 3: {
          for (std::uint64_t p = 1; p <= 8; ++p) {
            auto l = st.log.lookup(p);
            if (p <= st.log.low_watermark()) expect(l.status == A2mLog::LookupStatus::truncated);
            if (l.status == A2mLog::LookupStatus::found) {
              expect(st.seen.count(p) == 1 && l.attestation->msg_hash == st.seen.at(p));
            }
          }
          break;
        }
      }
    } catch (const TcError& e) {
      expect(e.code() == TcErrc::window_exceeded);
    }
  }, nodes);
  CHECK(ok);
  CHECK(nodes == tree_size(4, 8));
}
