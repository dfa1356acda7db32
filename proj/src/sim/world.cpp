#include "tcbft/sim/world.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace tcbft::sim {

using protocol::MsgKind;
using protocol::Note;
using nlohmann::json;

std::string_view to_string(ControlKind k) {
  switch (k) {
    case ControlKind::crash: return "crash";
    case ControlKind::snapshot_crash: return "snapshot_crash";
    case ControlKind::restore: return "restore";
    case ControlKind::restart: return "restart";
  }
  return "?";
}

std::uint64_t Tally::msgs_total() const {
  std::uint64_t t = 0;
  for (auto v : msgs) t += v;
  return t;
}

std::uint64_t Tally::bytes_total() const {
  std::uint64_t t = 0;
  for (auto v : bytes) t += v;
  return t;
}

bool Verdicts::responsive() const {
  return std::none_of(clients.begin(), clients.end(), [](const ClientVerdict& c) { return c.stalled; });
}

class World::NodeEnv final : public protocol::Env {
 public:
  NodeEnv(World& world, NodeId node) : world_(world), node_(node) {}

  TimeNs now() const override { return world_.now_; }
  void send(NodeId to, MessagePtr msg) override { world_.send(node_, to, std::move(msg)); }
  void arm_timer(protocol::TimerKey key, TimeNs delay, std::uint64_t token) override {
    Event ev;
    ev.kind = Event::Kind::timer;
    ev.to = node_;
    ev.from = node_;
    ev.key = key;
    ev.token = token;
    world_.schedule(world_.now_ + delay, std::move(ev));
  }
  tc::TrustedComponent& tc() override {
    if (node_ >= world_.config_.n()) throw std::logic_error("clients have no trusted component");
    return world_.bank_.at(node_);
  }
  const tc::TcDirectory& directory() const override { return world_.admin_.directory(); }
  void note(const Note& n) override {
    if (node_ < world_.config_.n()) world_.on_note(node_, n);
  }

 private:
  World& world_;
  NodeId node_;
};

World::World(SimConfig config)
    : config_(std::move(config)),
      protocol_(config_.protocol()),
      rng_(config_.seed),
      admin_(config_.system_seed(), config_.tc_mode, config_.n()) {
  config_.validate();
  const std::uint32_t n = config_.n();
  for (ReplicaId r = 0; r < n; ++r) {
    tc::TcOptions options{r, config_.tc_mode,
                          config_.vulnerable_tc ? tc::CounterPolicy::vulnerable : tc::CounterPolicy::strict,
                          protocol_.effective_tc_window()};
    bank_.add(admin_.deploy(options, 1, true));
    replicas_.emplace_back(r, protocol_);
  }
  for (ClientId c = 0; c < config_.clients; ++c) clients_.emplace_back(config_.client(c));
  crashed_.assign(n, false);
  deferred_.resize(n);
  epochs_.assign(n, 1);
  last_executed_.assign(n, 0);
  tally_.node_msgs.assign(n + config_.clients, 0);
  tally_.node_bytes.assign(n + config_.clients, 0);
  check_prepared_ = config_.script.name == "counter_identity";

  adversary_ = make_adversary(config_);
  faulty_ = adversary_->faulty();
  for (ClientId c = 0; c < config_.clients; ++c) {
    Event ev;
    ev.kind = Event::Kind::start;
    ev.to = n + c;
    ev.from = n + c;
    schedule(0, std::move(ev));
  }
  adversary_->start(*this);
}

World::World(const World& other)
    : config_(other.config_),
      protocol_(other.protocol_),
      rng_(other.rng_),
      now_(other.now_),
      next_event_id_(other.next_event_id_),
      queue_(other.queue_),
      admin_(other.admin_),
      bank_(other.bank_),
      replicas_(other.replicas_),
      clients_(other.clients_),
      adversary_(other.adversary_->clone()),
      faulty_(other.faulty_),
      crashed_(other.crashed_),
      deferred_(other.deferred_),
      snapshots_(other.snapshots_),
      epochs_(other.epochs_),
      committed_(other.committed_),
      first_commit_(other.first_commit_),
      prepared_(other.prepared_),
      chain_(other.chain_),
      last_executed_(other.last_executed_),
      admitted_(other.admitted_),
      replies_(other.replies_),
      violations_(other.violations_),
      check_prepared_(other.check_prepared_),
      tally_(other.tally_),
      trace_(other.trace_),
      highlights_(other.highlights_),
      gap_reported_(other.gap_reported_),
      diverged_(other.diverged_) {}

World& World::operator=(const World& other) {
  if (this != &other) *this = World(other);
  return *this;
}

World::~World() = default;

void World::schedule(TimeNs at, Event ev) {
  queue_.emplace(EventKey{at, next_event_id_++}, std::move(ev));
}

void World::run() {
  while (step()) {
  }
}

bool World::step() {
  if (queue_.empty()) return false;
  auto it = queue_.begin();
  if (it->first.time > config_.duration) return false;
  process(it->first);
  return true;
}

std::vector<EventKey> World::pending_deliveries() const {
  std::vector<EventKey> out;
  for (const auto& [key, ev] : queue_) {
    if (ev.kind == Event::Kind::deliver || ev.kind == Event::Kind::start) out.push_back(key);
  }
  return out;
}

std::optional<EventKey> World::next_timer() const {
  for (const auto& [key, ev] : queue_) {
    if (ev.kind == Event::Kind::timer || ev.kind == Event::Kind::control) return key;
  }
  return std::nullopt;
}

void World::process(EventKey key) {
  auto it = queue_.find(key);
  if (it == queue_.end()) throw std::logic_error("no such event");
  Event ev = std::move(it->second);
  queue_.erase(it);
  now_ = std::max(now_, key.time);
  handle(ev);
}

void World::handle(const Event& ev) {
  const std::uint32_t n = config_.n();
  NodeEnv env(*this, ev.to);
  switch (ev.kind) {
    case Event::Kind::start:
      clients_.at(ev.to - n).start(env);
      break;
    case Event::Kind::deliver:
      if (ev.to < n && crashed_[ev.to]) {
        deferred_[ev.to].push_back(ev);
        return;
      }
      if (config_.trace) {
        emit({{"ev", "deliver"},
              {"from", ev.from},
              {"to", ev.to},
              {"kind", protocol::to_string(ev.msg->kind())},
              {"msg", protocol::describe(*ev.msg)}});
      }
      if (ev.to < n) {
        replicas_[ev.to].on_message(env, ev.msg);
      } else {
        clients_.at(ev.to - n).on_message(env, ev.msg);
      }
      break;
    case Event::Kind::timer:
      if (ev.to < n && crashed_[ev.to]) {
        deferred_[ev.to].push_back(ev);
        return;
      }
      if (ev.to < n) {
        replicas_[ev.to].on_timer(env, ev.key, ev.token);
      } else {
        clients_.at(ev.to - n).on_timer(env, ev.key, ev.token);
      }
      break;
    case Event::Kind::control:
      apply_control(ev);
      break;
  }
}

void World::send(NodeId from, NodeId to, MessagePtr msg) {
  if (from < config_.n() && !adversary_->filter(*this, from, to, msg)) {
    ++tally_.withheld;
    if (config_.trace) {
      emit({{"ev", "withheld"},
            {"from", from},
            {"to", to},
            {"kind", protocol::to_string(msg->kind())},
            {"msg", protocol::describe(*msg)}});
    }
    return;
  }
  transmit(from, to, std::move(msg));
}

void World::inject(ReplicaId from, NodeId to, MessagePtr msg) {
  transmit(from, to, std::move(msg));
}

void World::transmit(NodeId from, NodeId to, MessagePtr msg) {
  const std::uint32_t n = config_.n();
  const std::size_t size = protocol::modeled_size(*msg, config_.sizes, config_.f, config_.threshold_proofs);
  const auto k = static_cast<std::size_t>(msg->kind());
  ++tally_.msgs[k];
  tally_.bytes[k] += size;
  (from < n && to < n ? tally_.replica_link_bytes : tally_.client_link_bytes) += size;
  ++tally_.node_msgs.at(from);
  tally_.node_bytes.at(from) += size;

  if (msg->kind() == MsgKind::reply && from < n && correct(from)) {
    const auto& r = msg->as<protocol::Reply>();
    auto [it, fresh] = replies_.try_emplace({r.client, r.client_seq}, r.result);
    if (!fresh && it->second != r.result) {
      violation(fmt::format("correct replicas replied different results to client {} request {}", r.client,
                            r.client_seq));
    }
  }

  // Lost copies are resent by the link after a round trip.
  TimeNs lost = 0;
  while (config_.drop_rate > 0 && std::uniform_real_distribution<double>(0, 1)(rng_) < config_.drop_rate) {
    ++tally_.dropped;
    lost += 2 * config_.delay_max;
    if (config_.trace) emit({{"ev", "lost"}, {"from", from}, {"to", to}, {"msg", protocol::describe(*msg)}});
  }
  Event ev;
  ev.kind = Event::Kind::deliver;
  ev.to = to;
  ev.from = from;
  ev.msg = std::move(msg);
  schedule(now_ + lost + sample_delay(from, to), std::move(ev));
}

TimeNs World::sample_delay(NodeId from, NodeId to) {
  TimeNs d = std::uniform_int_distribution<TimeNs>(config_.delay_min, config_.delay_max)(rng_);
  for (const auto& p : config_.partitions) {
    if (now_ < p.start || now_ >= p.end) continue;
    auto group_of = [&](NodeId node) -> int {
      for (std::size_t g = 0; g < p.groups.size(); ++g) {
        if (std::find(p.groups[g].begin(), p.groups[g].end(), node) != p.groups[g].end()) return static_cast<int>(g);
      }
      return -1;
    };
    const int a = group_of(from);
    const int b = group_of(to);
    if (a >= 0 && b >= 0 && a != b) d = std::max(d, p.end - now_ + d);
  }
  return d;
}

void World::schedule_control(TimeNs at, ControlKind kind, ReplicaId target) {
  Event ev;
  ev.kind = Event::Kind::control;
  ev.to = target;
  ev.from = target;
  ev.control = kind;
  schedule(at, std::move(ev));
}

void World::apply_control(const Event& ev) {
  const ReplicaId r = ev.to;
  if (config_.trace) emit({{"ev", "control"}, {"control", to_string(ev.control)}, {"replica", r}});
  tc::TcOptions options{r, config_.tc_mode,
                        config_.vulnerable_tc ? tc::CounterPolicy::vulnerable : tc::CounterPolicy::strict,
                        protocol_.effective_tc_window()};
  switch (ev.control) {
    case ControlKind::crash:
      if (crashed_[r]) return;
      bank_.at(r).crash();
      crashed_[r] = true;
      record(fmt::format("trusted component of replica {} stops; the replica is down", r));
      break;
    case ControlKind::snapshot_crash:
      if (crashed_[r]) return;
      snapshots_.insert_or_assign(r, admin_.snapshot(bank_.at(r)));
      crashed_[r] = true;
      record(fmt::format("administrator snapshots the trusted component of replica {}, which then stops", r));
      break;
    case ControlKind::restore: {
      auto blob = snapshots_.find(r);
      if (blob == snapshots_.end()) {
        record(fmt::format("no snapshot to restore for replica {}", r));
        return;
      }
      tc::TrustedComponent fresh = admin_.deploy(options, ++epochs_[r], false);
      try {
        admin_.restore(fresh, blob->second);
      } catch (const tc::TcError& e) {
        record(fmt::format("restore for replica {} refused: {}", r, e.what()));
        return;
      }
      bank_.replace(std::move(fresh));
      record(fmt::format("administrator restores the snapshot into a fresh component for replica {}; "
                         "its timeline continues at epoch {}",
                         r, bank_.at(r).identity().epoch));
      resume(r);
      break;
    }
    case ControlKind::restart: {
      tc::TrustedComponent fresh = admin_.deploy(options, ++epochs_[r], false);
      bank_.replace(std::move(fresh));
      record(fmt::format("replica {} restarts with a fresh trusted component (epoch {}) and no restore", r,
                         epochs_[r]));
      resume(r);
      break;
    }
  }
}

void World::resume(ReplicaId r) {
  crashed_[r] = false;
  std::vector<Event> held = std::move(deferred_[r]);
  deferred_[r].clear();
  for (auto& ev : held) schedule(now_, std::move(ev));
}

void World::record(std::string text) {
  if (config_.trace) emit({{"ev", "highlight"}, {"text", text}});
  highlights_.push_back({now_, std::move(text)});
}

void World::violation(std::string text) {
  if (std::find(violations_.begin(), violations_.end(), text) != violations_.end()) return;
  record("SAFETY VIOLATION: " + text);
  violations_.push_back(std::move(text));
}

void World::emit(json line) {
  line["t"] = now_;
  trace_.push_back(line.dump());
}

void World::on_note(ReplicaId r, const Note& note) {
  if (config_.trace) {
    json line{{"ev", "note"},
              {"node", r},
              {"note", protocol::to_string(note.kind)},
              {"view", note.view},
              {"seq", note.seq},
              {"peer", note.peer},
              {"value", note.value}};
    if (!note.digest.is_zero()) line["digest"] = note.digest.short_hex();
    if (!note.text.empty()) line["text"] = note.text;
    emit(std::move(line));
  }

  switch (note.kind) {
    case Note::Kind::flagged:
      record(fmt::format("replica {} flags replica {} ({}); its cursor for that sender stays at {}", r, note.peer,
                         note.text, note.value));
      break;
    case Note::Kind::view_change:
      record(fmt::format("replica {} starts a view change to view {} (cursor for leader {} at {})", r, note.view,
                         note.peer, note.value));
      break;
    case Note::Kind::new_view:
      record(fmt::format("replica {} installs view {} led by replica {}", r, note.view, note.peer));
      break;
    case Note::Kind::stale_epoch:
      if (gap_reported_.insert({r, note.peer}).second) {
        record(fmt::format("replica {} rejects a certificate from replica {}: stale trusted component epoch", r,
                           note.peer));
      }
      break;
    case Note::Kind::tc_refused:
      record(fmt::format("replica {}: trusted component refused: {}", r, note.text));
      break;
    case Note::Kind::state_transfer:
      record(fmt::format("replica {} installs transferred state up to seq {}", r, note.seq));
      break;
    default: break;
  }

  if (!correct(r)) return;
  switch (note.kind) {
    case Note::Kind::committed: {
      auto& at = committed_[note.seq];
      for (const auto& [other, digest] : at) {
        if (digest != note.digest) {
          violation(fmt::format("replicas {} and {} committed different batches at seq {}", other, r, note.seq));
        }
      }
      at[r] = note.digest;
      first_commit_.try_emplace(note.seq, now_);
      break;
    }
    case Note::Kind::prepared: {
      if (!check_prepared_) break;
      auto& at = prepared_[{note.view, note.seq}];
      for (const auto& [other, digest] : at) {
        if (digest != note.digest) {
          violation(fmt::format("replicas {} and {} prepared conflicting batches at view {} seq {}", other, r,
                                note.view, note.seq));
        }
      }
      at[r] = note.digest;
      break;
    }
    case Note::Kind::executed:
    case Note::Kind::state_transfer: {
      if (note.kind == Note::Kind::executed && note.seq != last_executed_[r] + 1) {
        violation(fmt::format("replica {} executed seq {} right after seq {}", r, note.seq, last_executed_[r]));
      }
      last_executed_[r] = note.seq;
      auto [it, fresh] = chain_.try_emplace(note.seq, note.digest);
      if (!fresh && it->second != note.digest && diverged_.insert(r).second) {
        violation(fmt::format("replica {} reached a different execution state at seq {}", r, note.seq));
      }
      break;
    }
    case Note::Kind::admitted: {
      if (config_.mode != protocol::Mode::detection) break;
      auto [it, fresh] = admitted_.try_emplace({note.peer, note.counter, note.value}, note.digest);
      if (!fresh && it->second != note.digest) {
        violation(fmt::format("correct replicas admitted different statements at value {} of replica {}",
                              note.value, note.peer));
      }
      break;
    }
    default: break;
  }
}

std::vector<std::string> World::certificate_scan() const {
  std::vector<std::string> out;
  std::map<std::tuple<ReplicaId, std::uint64_t, std::uint64_t, std::uint64_t>, std::size_t> by_value;
  std::map<std::tuple<ReplicaId, std::uint64_t, tc::ContextId>, std::size_t> by_context;
  for (const auto& ui : bank_.all_issued()) {
    if (!ui.context && ++by_value[{ui.tc.replica, ui.tc.epoch, ui.counter.name, ui.value}] == 2) {
      out.push_back(fmt::format("replica {} epoch {} holds two certificates for value {} of one counter",
                                ui.tc.replica, ui.tc.epoch, ui.value));
    }
    if (ui.context && ++by_context[{ui.tc.replica, ui.tc.epoch, *ui.context}] == 2) {
      out.push_back(fmt::format("replica {} epoch {} holds two certificates for context ({}, view {}, seq {})",
                                ui.tc.replica, ui.tc.epoch, tc::to_string(ui.context->phase), ui.context->view,
                                ui.context->seq));
    }
  }
  return out;
}

Verdicts World::verdicts(TimeNs end) const {
  Verdicts v;
  v.safety = violations_;
  for (auto& s : certificate_scan()) v.safety.push_back(std::move(s));

  const TimeNs cutoff = end - config_.stall_window();
  const std::uint32_t n = config_.n();
  for (const auto& c : clients_) {
    for (const auto& [cseq, result] : c.accepted()) {
      auto sent = replies_.find({c.id(), cseq});
      if (sent == replies_.end() || sent->second != result) {
        v.safety.push_back(fmt::format("client {} accepted a result for request {} that no correct replica sent",
                                       c.id(), cseq));
      }
    }
    ClientVerdict cv{c.id(), false, c.completed(), 0};
    auto since = c.in_flight_since();
    if (since && *since < cutoff) {
      cv.stalled = true;
      cv.stalled_seq = c.in_flight_seq();
      bool executed = false;
      for (ReplicaId r = 0; r < n; ++r) {
        if (!correct(r)) continue;
        const auto& replies = replicas_[r].state().replies;
        auto it = replies.find(c.id());
        if (it != replies.end() && it->second.client_seq >= cv.stalled_seq) executed = true;
      }
      if (!executed) {
        v.liveness.push_back(
            fmt::format("client {} request {} waits since {} ms and no correct replica executed it", c.id(),
                        cv.stalled_seq, static_cast<double>(*since) / static_cast<double>(kMillisecond)));
      }
    }
    v.clients.push_back(cv);
  }

  for (const auto& [seq, at] : first_commit_) {
    if (at >= cutoff) continue;
    for (ReplicaId r = 0; r < n; ++r) {
      if (!correct(r) || crashed_[r] || replicas_[r].halted()) continue;
      if (replicas_[r].executed() < seq && replicas_[r].stable_seq() < seq) {
        v.unterminated.push_back(seq);
        break;
      }
    }
  }
  return v;
}

std::vector<ReplicaSummary> World::replica_summaries() const {
  std::vector<ReplicaSummary> out;
  for (const auto& rep : replicas_) {
    ReplicaSummary s;
    s.id = rep.id();
    s.faulty = !correct(rep.id());
    s.crashed = crashed_[rep.id()];
    s.halted = rep.halted();
    s.view = rep.view();
    s.in_view_change = rep.in_view_change();
    s.executed = rep.executed();
    s.stable = rep.stable_seq();
    for (ReplicaId p = 0; p < config_.n(); ++p) {
      s.cursors.push_back(rep.cursor_of(p));
      s.flagged.push_back(rep.has_flagged(p));
    }
    s.tc_accesses = bank_.at(rep.id()).access_count();
    s.certificates = bank_.at(rep.id()).certificate_count();
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

Digest message_fingerprint(const protocol::Message& m) {
  Encoder e;
  e.u8(static_cast<std::uint8_t>(m.kind())).u32(m.from);
  for (const auto* ui : protocol::certificates_of(m)) e.u64(ui->counter.name).u64(ui->value).digest(ui->msg_hash);
  switch (m.kind()) {
    case MsgKind::request: e.digest(m.as<protocol::Request>().digest); break;
    case MsgKind::reply: {
      const auto& r = m.as<protocol::Reply>();
      e.u32(r.client).u64(r.client_seq).u64(r.view).u64(r.seq).digest(r.result);
      break;
    }
    case MsgKind::prepare: e.u8(m.as<protocol::Prepare>().batch ? 1 : 0); break;
    case MsgKind::decision: {
      const auto& d = m.as<protocol::Decision>();
      e.u64(d.view).u64(d.seq).digest(d.batch_digest);
      break;
    }
    case MsgKind::fetch_request: {
      const auto& f = m.as<protocol::FetchRequest>();
      e.u64(f.seq).digest(f.prepare_digest);
      break;
    }
    case MsgKind::fetch_reply: e.digest(m.as<protocol::FetchReply>().prepare->statement()); break;
    case MsgKind::state_request: e.u64(m.as<protocol::StateRequest>().seq); break;
    case MsgKind::state_reply: e.u64(m.as<protocol::StateReply>().seq).bytes(m.as<protocol::StateReply>().state); break;
    default: break;
  }
  return e.hash();
}

}  // namespace

Digest World::fingerprint() const {
  Encoder e;
  for (const auto& r : replicas_) e.digest(r.fingerprint());
  for (const auto& c : clients_) e.u64(c.completed()).u64(c.in_flight_seq()).u64(c.retransmissions());
  std::vector<Digest> deliveries;
  for (const auto& [key, ev] : queue_) {
    if (ev.kind == Event::Kind::deliver) {
      Encoder d;
      d.u32(ev.to).digest(message_fingerprint(*ev.msg));
      deliveries.push_back(d.hash());
    } else {
      e.u8(static_cast<std::uint8_t>(ev.kind)).u32(ev.to);
      e.u8(static_cast<std::uint8_t>(ev.key.kind)).u64(ev.key.a).u64(ev.token);
    }
  }
  std::sort(deliveries.begin(), deliveries.end());
  for (const auto& d : deliveries) e.digest(d);
  for (bool c : crashed_) e.u8(c ? 1 : 0);
  adversary_->fingerprint(e);
  e.u32(static_cast<std::uint32_t>(violations_.size()));
  return e.hash();
}

Trace run(const SimConfig& config) {
  World world(config);
  world.run();
  Trace t;
  t.config = config;
  t.end = std::max(world.now(), config.duration);
  t.verdicts = world.verdicts(t.end);
  t.tally = world.tally();
  t.replicas = world.replica_summaries();
  t.events = world.trace();
  t.highlights = world.highlights();
  for (ClientId c = 0; c < config.clients; ++c) {
    const auto& client = world.client(c);
    t.latencies.insert(t.latencies.end(), client.latencies().begin(), client.latencies().end());
    t.ops_completed += client.completed();
  }
  for (const auto& r : t.replicas) {
    if (!r.faulty) t.batches_committed = std::max(t.batches_committed, r.executed);
  }
  return t;
}

}  // namespace tcbft::sim
