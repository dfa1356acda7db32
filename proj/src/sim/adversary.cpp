#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>

#include "tcbft/sim/world.hpp"

namespace tcbft::sim {

namespace {

using protocol::Batch;
using protocol::BatchPtr;
using protocol::MsgKind;
using protocol::Prepare;
using protocol::PreparePtr;

std::uint64_t param(const nlohmann::json& params, const char* name, std::uint64_t fallback) {
  if (!params.contains(name)) return fallback;
  const auto& v = params[name];
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number()) return static_cast<std::uint64_t>(v.get<double>());
  throw ConfigError(fmt::format("script parameter {} must be a number", name));
}

bool flag(const nlohmann::json& params, const char* name) { return param(params, name, 0) != 0; }

TimeNs param_ms(const nlohmann::json& params, const char* name, TimeNs fallback) {
  if (!params.contains(name)) return fallback;
  return static_cast<TimeNs>(params[name].get<double>() * static_cast<double>(kMillisecond));
}

std::vector<ReplicaId> followers(std::uint32_t n, ReplicaId leader) {
  std::vector<ReplicaId> out;
  for (ReplicaId r = 0; r < n; ++r) {
    if (r != leader) out.push_back(r);
  }
  return out;
}

bool contains(const std::vector<ReplicaId>& v, NodeId x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Counter value of the last certificate the message carries.
std::optional<std::uint64_t> last_value(const protocol::Message& m) {
  auto certs = protocol::certificates_of(m);
  if (certs.empty()) return std::nullopt;
  return certs.back()->value;
}

class NoAdversary final : public Adversary {
 public:
  std::unique_ptr<Adversary> clone() const override { return std::make_unique<NoAdversary>(*this); }
};

/// The leader certifies x at value X and sends it to group A only, keeps
/// sending X+1 .. X+gap-1 to everyone, then certifies a conflicting y at
/// X+gap for group B and falls silent.
class EquivocateWithhold final : public Adversary {
 public:
  explicit EquivocateWithhold(const SimConfig& c)
      : leader_(static_cast<ReplicaId>(param(c.script.params, "leader", 0))),
        x_(param(c.script.params, "x_value", 47)),
        gap_(std::max<std::uint64_t>(1, param(c.script.params, "gap", 8))),
        leak_(flag(c.script.params, "leak")),
        mode_(c.mode) {
    auto others = followers(c.n(), leader_);
    a_.assign(others.begin(), others.begin() + c.f);
    b_.assign(others.begin() + c.f, others.end());
  }

  std::unique_ptr<Adversary> clone() const override { return std::make_unique<EquivocateWithhold>(*this); }
  std::set<ReplicaId> faulty() const override { return {leader_}; }

  bool filter(World& world, ReplicaId from, NodeId to, const MessagePtr& msg) override {
    if (from != leader_) return true;
    auto value = last_value(*msg);
    // Per-phase counters: only the prepare timeline carries the attack.
    if (mode_ == protocol::Mode::prevention && msg->kind() != MsgKind::prepare) value.reset();
    if (!value) return !y_done_;
    if (msg->kind() == MsgKind::prepare && *value <= x_) last_prepare_ = PreparePtr(msg, &msg->as<Prepare>());
    if (*value < x_) return true;
    if (*value >= x_ + gap_) return false;
    if (*value == x_) {
      if (!x_announced_) {
        x_announced_ = true;
        x_prepare_ = last_prepare_;
        world.record(fmt::format("replica {} sends its certified message at value {} ({}) to replicas {} only",
                                 leader_, x_, protocol::describe(*msg), fmt::join(a_, ",")));
      }
    } else if (msg->kind() == MsgKind::prepare && !y_source_) {
      const auto& p = msg->as<Prepare>();
      if (p.batch && (!x_prepare_ || p.batch_digest != x_prepare_->batch_digest)) y_source_ = p.batch;
    }
    if (*value == x_ + gap_ - 1 && !y_done_) equivocate(world);
    return *value != x_ || contains(a_, to);
  }

  void fingerprint(Encoder& e) const override {
    e.u8(x_announced_ ? 1 : 0).u8(y_done_ ? 1 : 0).u8(y_source_ ? 1 : 0);
  }

 private:
  void equivocate(World& world) {
    y_done_ = true;
    if (!x_prepare_) {
      world.record(fmt::format("replica {} had no prepare at or below value {}; no conflicting statement made",
                               leader_, x_));
      return;
    }
    BatchPtr batch = y_source_;
    if (!batch) {
      auto requests = x_prepare_->batch ? x_prepare_->batch->requests : std::vector<protocol::RequestPtr>{};
      std::reverse(requests.begin(), requests.end());
      batch = Batch::make(requests);
      if (batch->digest == x_prepare_->batch_digest) batch = Batch::make({});
    }
    Prepare y{x_prepare_->view, x_prepare_->seq, leader_, batch->digest, batch, {}};
    auto& component = world.tc_of(leader_);
    try {
      if (mode_ == protocol::Mode::detection) {
        y.ui = component.create_ui(y.statement());
      } else {
        y.ui = component.certify({tc::Phase::prepare, y.view, y.seq}, y.statement());
      }
    } catch (const tc::TcError& e) {
      world.record(fmt::format("replica {} asks its trusted component for a conflicting prepare at seq {}: {} ({})",
                               leader_, y.seq, tc::to_string(e.code()), e.what()));
      return;
    }
    const auto targets = leak_ ? followers(world.config().n(), leader_) : b_;
    std::vector<std::string> cursors;
    for (ReplicaId r : followers(world.config().n(), leader_)) {
      cursors.push_back(fmt::format("{}:{}", r, world.replica(r).cursor_of(leader_)));
    }
    world.record(fmt::format("follower cursors for replica {} now stand at {}", leader_, fmt::join(cursors, " ")));
    world.record(fmt::format("replica {} certifies a conflicting prepare for seq {} at value {} and sends it to "
                             "replicas {} only; it then falls silent",
                             leader_, y.seq, y.ui.value, fmt::join(targets, ",")));
    auto msg = protocol::make_message(leader_, std::move(y));
    for (ReplicaId r : targets) world.inject(leader_, r, msg);
  }

  ReplicaId leader_;
  std::uint64_t x_;
  std::uint64_t gap_;
  bool leak_;
  protocol::Mode mode_;
  std::vector<ReplicaId> a_;
  std::vector<ReplicaId> b_;
  PreparePtr last_prepare_;
  PreparePtr x_prepare_;
  BatchPtr y_source_;
  bool x_announced_ = false;
  bool y_done_ = false;
};

/// The leader never delivers its certified message at one counter value.
class GapForever final : public Adversary {
 public:
  explicit GapForever(const SimConfig& c)
      : leader_(static_cast<ReplicaId>(param(c.script.params, "leader", 0))),
        x_(param(c.script.params, "x_value", 47)) {}

  std::unique_ptr<Adversary> clone() const override { return std::make_unique<GapForever>(*this); }
  std::set<ReplicaId> faulty() const override { return {leader_}; }

  bool filter(World& world, ReplicaId from, NodeId, const MessagePtr& msg) override {
    if (from != leader_) return true;
    auto value = last_value(*msg);
    if (!value || *value != x_) return true;
    if (!reported_) {
      reported_ = true;
      world.record(fmt::format("replica {} withholds its certified message at value {} ({}) from everyone", leader_,
                               x_, protocol::describe(*msg)));
    }
    return false;
  }

  void fingerprint(Encoder& e) const override { e.u8(reported_ ? 1 : 0); }

 private:
  ReplicaId leader_;
  std::uint64_t x_;
  bool reported_ = false;
};

/// With a TC that mints counters on request, the leader binds two different
/// batches to value 1 of two fresh counters and shows each to half of the
/// followers.
class CounterIdentity final : public Adversary {
 public:
  explicit CounterIdentity(const SimConfig& c)
      : leader_(static_cast<ReplicaId>(param(c.script.params, "leader", 0))),
        trigger_(std::max<std::uint64_t>(1, param(c.script.params, "trigger_seq", 1))) {
    auto others = followers(c.n(), leader_);
    a_.assign(others.begin(), others.begin() + c.f);
    b_.assign(others.begin() + c.f, others.end());
  }

  std::unique_ptr<Adversary> clone() const override { return std::make_unique<CounterIdentity>(*this); }
  std::set<ReplicaId> faulty() const override { return {leader_}; }

  bool filter(World& world, ReplicaId from, NodeId, const MessagePtr& msg) override {
    if (from != leader_ || inert_) return true;
    if (fired_) return false;
    if (msg->kind() != MsgKind::prepare || msg->as<Prepare>().seq != trigger_) return true;
    fired_ = true;
    const Prepare& real = msg->as<Prepare>();
    auto& component = world.tc_of(leader_);
    tc::CounterId q;
    tc::CounterId q2;
    try {
      q = component.create_counter();
      q2 = component.create_counter();
    } catch (const tc::TcError& e) {
      inert_ = true;
      world.record(fmt::format("replica {} tries to create fresh counters: {} ({}); the attack cannot start",
                               leader_, tc::to_string(e.code()), e.what()));
      return true;
    }
    BatchPtr t = real.batch;
    auto requests = t->requests;
    std::reverse(requests.begin(), requests.end());
    BatchPtr t2 = requests.size() > 1 ? Batch::make(requests) : Batch::make({});

    Prepare p{real.view, real.seq, leader_, t->digest, t, {}};
    p.ui = component.create_ui(q, p.statement());
    Prepare p2{real.view, real.seq, leader_, t2->digest, t2, {}};
    p2.ui = component.create_ui(q2, p2.statement());
    world.record(fmt::format("replica {} creates counters q={:x} and q'={:x}; binds batch {} to q:{} for replicas "
                             "{} and batch {} to q':{} for replicas {}",
                             leader_, q.name, q2.name, t->digest.short_hex(), p.ui.value, fmt::join(a_, ","),
                             t2->digest.short_hex(), p2.ui.value, fmt::join(b_, ",")));
    auto m = protocol::make_message(leader_, std::move(p));
    auto m2 = protocol::make_message(leader_, std::move(p2));
    for (ReplicaId r : a_) world.inject(leader_, r, m);
    for (ReplicaId r : b_) world.inject(leader_, r, m2);
    return false;
  }

  void fingerprint(Encoder& e) const override { e.u8(fired_ ? 1 : 0).u8(inert_ ? 1 : 0); }

 private:
  ReplicaId leader_;
  Seq trigger_;
  std::vector<ReplicaId> a_;
  std::vector<ReplicaId> b_;
  bool fired_ = false;
  bool inert_ = false;
};

/// f faulty replicas, including the leader, run consensus with a single
/// correct witness and never reply to clients.
class SilentRepliers final : public Adversary {
 public:
  explicit SilentRepliers(const SimConfig& c) : witness_(c.f) {
    for (ReplicaId r = 0; r < c.f; ++r) byzantine_.push_back(r);
  }

  std::unique_ptr<Adversary> clone() const override { return std::make_unique<SilentRepliers>(*this); }
  std::set<ReplicaId> faulty() const override { return {byzantine_.begin(), byzantine_.end()}; }

  void start(World& world) override {
    world.record(fmt::format("replicas {} are faulty: they commit with witness replica {} only and never answer "
                             "clients",
                             fmt::join(byzantine_, ","), witness_));
  }

  bool filter(World&, ReplicaId from, NodeId to, const MessagePtr& msg) override {
    if (!contains(byzantine_, from)) return true;
    const bool inner = contains(byzantine_, to) || to == witness_;
    switch (msg->kind()) {
      case MsgKind::prepare: return inner;
      case MsgKind::commit:
      case MsgKind::checkpoint: return to == witness_;
      case MsgKind::fetch_request:
      case MsgKind::fetch_reply:
      case MsgKind::state_request:
      case MsgKind::state_reply: return inner;
      default: return false;
    }
  }

 private:
  ReplicaId witness_;
  std::vector<ReplicaId> byzantine_;
};

/// Stops k trusted components; optionally brings one back through the
/// administrator's snapshot path or restarts it without its state.
class CrashTcs final : public Adversary {
 public:
  explicit CrashTcs(const SimConfig& c)
      : n_(c.n()),
        k_(param(c.script.params, "k", 1)),
        first_(static_cast<ReplicaId>(param(c.script.params, "first", 0))),
        at_(param_ms(c.script.params, "at_ms", 500 * kMillisecond)),
        restore_one_(flag(c.script.params, "restore_one")),
        restart_(flag(c.script.params, "restart")) {
    restore_at_ = param_ms(c.script.params, "restore_at_ms", at_ + 1000 * kMillisecond);
  }

  std::unique_ptr<Adversary> clone() const override { return std::make_unique<CrashTcs>(*this); }

  void start(World& world) override {
    for (std::uint64_t i = 0; i < std::min<std::uint64_t>(k_, n_); ++i) {
      const ReplicaId r = static_cast<ReplicaId>((first_ + i) % n_);
      const bool snapshot = restore_one_ && i == 0;
      world.schedule_control(at_, snapshot ? ControlKind::snapshot_crash : ControlKind::crash, r);
    }
    if (restore_one_) world.schedule_control(restore_at_, ControlKind::restore, first_ % n_);
    if (restart_) world.schedule_control(restore_at_, ControlKind::restart, first_ % n_);
  }

 private:
  std::uint32_t n_;
  std::uint64_t k_;
  ReplicaId first_;
  TimeNs at_;
  bool restore_one_;
  bool restart_;
  TimeNs restore_at_ = 0;
};

}  // namespace

std::unique_ptr<Adversary> make_adversary(const SimConfig& config) {
  const std::string& name = config.script.name;
  if (name == "none") return std::make_unique<NoAdversary>();
  if (name == "equivocate_withhold") return std::make_unique<EquivocateWithhold>(config);
  if (name == "gap_forever") return std::make_unique<GapForever>(config);
  if (name == "counter_identity") return std::make_unique<CounterIdentity>(config);
  if (name == "silent_repliers") return std::make_unique<SilentRepliers>(config);
  if (name == "crash_tcs") return std::make_unique<CrashTcs>(config);
  throw ConfigError(fmt::format("unknown script '{}'", name));
}

}  // namespace tcbft::sim
