#include "tcbft/sim/explorer.hpp"

#include <set>
#include <unordered_map>

#include "tcbft/sim/world.hpp"

namespace tcbft::sim {

namespace {

struct DigestHash {
  std::size_t operator()(const Digest& d) const {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h |= std::size_t{d.bytes[i]} << (8 * i);
    return h;
  }
};

struct Frame {
  World world;
  std::vector<EventKey> choices;
  std::size_t next = 0;
};

std::vector<EventKey> choices_of(const World& w, bool timers_anytime) {
  auto out = w.pending_deliveries();
  auto timer = w.next_timer();
  if (timer && (out.empty() || timers_anytime)) out.push_back(*timer);
  return out;
}

View highest_target(const World& w) {
  View v = 0;
  for (ReplicaId r = 0; r < w.config().n(); ++r) {
    if (w.is_faulty(r)) continue;
    const auto& rep = w.replica(r);
    v = std::max(v, rep.in_view_change() ? rep.view_change_target() : rep.view());
  }
  return v;
}

bool past_view_zero(const World& w) {
  for (ReplicaId r = 0; r < w.config().n(); ++r) {
    if (!w.is_faulty(r) && w.replica(r).view() > 0) return true;
  }
  return false;
}

}  // namespace

ExploreResult explore(const ExploreOptions& options) {
  ExploreResult result;
  std::unordered_map<Digest, std::size_t, DigestHash> seen;  // shallowest depth reached
  std::set<std::string> reported;

  // Judges a freshly reached state; true when it should be expanded.
  auto admit = [&](const World& w, std::size_t depth) {
    if (!w.violations().empty()) {
      if (reported.insert(w.violations().front()).second) result.violations.push_back(w.violations().front());
      return false;
    }
    auto [it, fresh] = seen.try_emplace(w.fingerprint(), depth);
    if (!fresh) {
      ++result.revisits;
      if (it->second <= depth) return false;
      it->second = depth;
    } else {
      ++result.states;
      if (past_view_zero(w)) {
        ++result.view_change_states;
        if (result.first_view_change == 0) result.first_view_change = depth;
      }
    }
    result.deepest = std::max(result.deepest, depth);
    if (seen.size() >= options.max_states) result.budget_exhausted = true;
    if (highest_target(w) > options.max_view) {
      ++result.view_cuts;
      return false;
    }
    return true;
  };

  World root(options.config);
  if (!admit(root, 0)) return result;
  std::vector<Frame> stack;
  stack.push_back({root, choices_of(root, options.timers_anytime)});

  while (!stack.empty() && !result.budget_exhausted) {
    Frame& top = stack.back();
    if (top.choices.empty() && top.next == 0) {
      ++result.terminal;
      top.next = 1;
    }
    if (top.next >= top.choices.size()) {
      stack.pop_back();
      continue;
    }
    const EventKey key = top.choices[top.next++];
    if (stack.size() > options.max_depth) {
      ++result.depth_cuts;
      top.next = top.choices.size();
      continue;
    }
    World child = top.world;
    child.process(key);
    ++result.transitions;
    if (!admit(child, stack.size())) continue;
    auto choices = choices_of(child, options.timers_anytime);
    stack.push_back({std::move(child), std::move(choices)});
  }
  return result;
}

SimConfig small_model_config(const std::string& script, bool leak) {
  SimConfig c;
  c.f = 1;
  c.batch_size = 1;
  c.clients = 1;
  c.requests_per_client = 1;
  c.checkpoint_interval = 0;
  c.decisions = true;
  c.delta = 0;
  c.batch_timeout = 0;
  c.tc_mode = tc::CertMode::hmac;
  c.trace = false;
  c.duration = 3600'000 * kMillisecond;
  c.script.name = script;
  if (script == "equivocate_withhold") {
    c.script.params = {{"x_value", 1}, {"gap", 1}, {"leak", leak}};
  } else if (script == "gap_forever") {
    c.script.params = {{"x_value", 1}};
  }
  return c;
}

}  // namespace tcbft::sim
