#include "tcbft/protocol/replica.hpp"

#include <algorithm>

#include "tcbft/core/encoding.hpp"

namespace tcbft::protocol {


Replica::Replica(ReplicaId id, ProtocolConfig config)
    : id_(id), config_(std::move(config)), timelines_(config_.n()), peer_commit_high_(config_.n(), 0),
      highest_vc_(config_.n(), 0) {
  for (ReplicaId r = 0; r < config_.n(); ++r) timelines_[r].counter = tc::CounterId::usig(r);
}

std::uint64_t Replica::cursor_of(ReplicaId sender) const {
  return sender < timelines_.size() ? timelines_[sender].cursor : 0;
}

bool Replica::has_flagged(ReplicaId sender) const {
  return sender < timelines_.size() && timelines_[sender].flagged;
}

void Replica::on_message(Env& env, const MessagePtr& msg) {
  if (halted_) return;
  try {
    switch (msg->kind()) {
      case MsgKind::request: on_request(env, msg->as<Request>(), msg); break;
      case MsgKind::prepare:
      case MsgKind::commit:
      case MsgKind::checkpoint:
      case MsgKind::view_change:
      case MsgKind::new_view: intake_certified(env, msg); break;
      case MsgKind::decision:
        if (msg->as<Decision>().sender == msg->from) on_decision(env, msg->as<Decision>());
        break;
      case MsgKind::fetch_request: on_fetch_request(env, msg->from, msg->as<FetchRequest>()); break;
      case MsgKind::fetch_reply: on_fetch_reply(env, msg->as<FetchReply>()); break;
      case MsgKind::state_request: on_state_request(env, msg->from, msg->as<StateRequest>()); break;
      case MsgKind::state_reply: on_state_reply(env, msg->as<StateReply>()); break;
      case MsgKind::reply: break;
    }
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
    env.note({.kind = Note::Kind::tc_refused, .view = view_, .text = e.what()});
  }
}

void Replica::on_timer(Env& env, TimerKey key, std::uint64_t token) {
  if (halted_ || !timer_live(key, token)) return;
  timers_.erase(key);
  try {
    switch (key.kind) {
      case TimerKind::batch:
        batch_expired_ = true;
        try_propose(env);
        break;
      case TimerKind::decision: send_decisions(env, key.a, true); break;
      case TimerKind::suspect:
        if (pending_.empty()) break;
        if (state_.executed != suspect_mark_) {
          arm_suspect(env);
        } else if (!in_vc_) {
          start_view_change(env, view_ + 1);
        }
        break;
      case TimerKind::view_change:
        if (in_vc_ && vc_target_ == key.a) start_view_change(env, key.a + 1);
        break;
      case TimerKind::fetch: {
        execute_ready(env);
        auto it = fetches_.find(key.a);
        if (it == fetches_.end() || it->second.sources.empty()) break;
        FetchState& fs = it->second;
        ReplicaId to = fs.sources[fs.next++ % fs.sources.size()];
        env.send(to, make_message(id_, FetchRequest{key.a, fs.prepare_digest, id_}));
        arm(env, key, config_.fetch_timeout);
        break;
      }
      case TimerKind::state:
        if (key.a != 0) {
          // Lag check: a stable checkpoint ahead of us that we still have not reached.
          auto cps = checkpoints_.find(key.a);
          if (state_.executed >= key.a || cps == checkpoints_.end()) break;
          std::map<Digest, std::vector<ReplicaId>> by_digest;
          for (const auto& [r, cp] : cps->second) by_digest[cp.state_digest].push_back(r);
          for (const auto& [digest, who] : by_digest) {
            if (who.size() >= config_.quorum()) request_state(env, key.a, digest, who);
          }
        } else if (state_target_ && !state_target_->sources.empty()) {
          StateTarget& st = *state_target_;
          ReplicaId to = st.sources[++st.next % st.sources.size()];
          env.send(to, make_message(id_, StateRequest{st.seq, id_}));
          arm(env, {TimerKind::state, 0}, config_.fetch_timeout);
        }
        break;
      case TimerKind::retransmit: break;
    }
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
    env.note({.kind = Note::Kind::tc_refused, .view = view_, .text = e.what()});
  }
}

// ---------------------------------------------------------------------------
// Intake

void Replica::intake_certified(Env& env, const MessagePtr& msg) {
  if (config_.mode == Mode::detection) {
    intake_detection(env, msg);
  } else {
    intake_prevention(env, msg);
  }
}

void Replica::intake_detection(Env& env, const MessagePtr& msg) {
  auto who = certifier_of(*msg);
  if (!who || *who >= config_.n() || *who == id_) return;
  Timeline& t = timelines_[*who];
  if (t.flagged) return;
  auto uis = certificates_of(*msg);
  const tc::UniqueIdentifier& first = *uis.front();
  const tc::UniqueIdentifier& last = *uis.back();

  if (first.counter != t.counter) {
    bool fresh = config_.counter_acceptance == CounterAcceptance::announced && first.value == 1;
    if (!fresh || !verify_certified(env, *msg)) return;
    t = Timeline{};
    t.counter = first.counter;
    admit(env, *who, msg);
    drain_timeline(env, *who);
    return;
  }

  if (last.value <= t.cursor) {
    bool same = true;
    bool known = true;
    for (const auto* ui : uis) {
      auto it = t.admitted.find(ui->value);
      if (it == t.admitted.end()) {
        known = false;
      } else if (it->second != ui->msg_hash) {
        same = false;
      }
    }
    if (!same) {
      if (verify_certified(env, *msg)) flag(env, *who, "two certificates for one counter value");
      return;
    }
    if (known && msg->kind() == MsgKind::prepare && msg->as<Prepare>().batch) adopt_batch(env, msg->as<Prepare>());
    return;
  }
  if (first.value <= t.cursor) return;

  if (!verify_certified(env, *msg)) return;
  if (first.value != t.cursor + 1) {
    auto [it, inserted] = t.buffer.try_emplace(first.value, msg);
    if (!inserted) {
      auto held = certificates_of(*it->second);
      if (held.back()->msg_hash != last.msg_hash || held.size() != uis.size()) {
        flag(env, *who, "two certificates for one counter value");
      }
      return;
    }
    env.note({.kind = Note::Kind::buffered,
              .view = view_,
              .peer = *who,
              .counter = first.counter.name,
              .value = first.value,
              .digest = first.msg_hash});
    return;
  }
  if (auto why = conflict(*msg)) {
    flag(env, *who, *why);
    return;
  }
  admit(env, *who, msg);
  drain_timeline(env, *who);
}

void Replica::drain_timeline(Env& env, ReplicaId sender) {
  Timeline& t = timelines_[sender];
  while (!t.flagged) {
    while (!t.buffer.empty() && t.buffer.begin()->first <= t.cursor) t.buffer.erase(t.buffer.begin());
    auto it = t.buffer.find(t.cursor + 1);
    if (it == t.buffer.end()) return;
    MessagePtr next = it->second;
    t.buffer.erase(it);
    if (auto why = conflict(*next)) {
      flag(env, sender, *why);
      return;
    }
    admit(env, sender, next);
  }
}

std::optional<std::string> Replica::conflict(const Message& msg) const {
  if (msg.kind() == MsgKind::prepare) {
    const auto& p = msg.as<Prepare>();
    if (p.leader != config_.leader_of(p.view) || p.view != view_ || in_vc_) return std::nullopt;
    auto slot = slots_.find({p.view, p.seq});
    if (slot != slots_.end() && slot->second.prepare && slot->second.prepare->batch_digest != p.batch_digest) {
      return "conflicting prepare";
    }
    if (p.seq > expected_prepare_seq_ && p.seq > stable_seq_ + 1) return "prepare out of sequence";
  } else if (msg.kind() == MsgKind::commit) {
    const auto& c = msg.as<Commit>();
    auto slot = slots_.find({c.view, c.seq});
    if (slot == slots_.end()) return std::nullopt;
    for (const auto& [digest, who] : slot->second.commits) {
      if (digest != c.prepare_digest && who.count(c.replica)) return "conflicting commit";
    }
  }
  return std::nullopt;
}

void Replica::admit(Env& env, ReplicaId sender, const MessagePtr& msg) {
  Timeline& t = timelines_[sender];
  for (const auto* ui : certificates_of(*msg)) {
    t.admitted[ui->value] = ui->msg_hash;
    t.cursor = ui->value;
  }
  const auto& last = *certificates_of(*msg).back();
  env.note({.kind = Note::Kind::admitted,
            .view = view_,
            .peer = sender,
            .counter = last.counter.name,
            .value = last.value,
            .digest = last.msg_hash,
            .text = std::string(to_string(msg->kind()))});
  dispatch_certified(env, msg);
}

void Replica::intake_prevention(Env& env, const MessagePtr& msg) {
  auto who = certifier_of(*msg);
  if (!who || *who >= config_.n() || *who == id_ || timelines_[*who].flagged) return;
  if (!verify_certified(env, *msg)) return;
  const auto& ui = *certificates_of(*msg).back();
  if (msg->kind() == MsgKind::prepare) {
    PreparePtr p(msg, &msg->as<Prepare>());
    if (p->view < view_ || p->leader != config_.leader_of(p->view)) return;
    auto& queue = prepare_queue_[p->view];
    auto it = queue.find(p->seq);
    if (it == queue.end()) {
      queue.emplace(p->seq, p);
    } else if (!it->second->batch && p->batch) {
      it->second = p;
    }
    auto slot = slots_.find({p->view, p->seq});
    if (slot != slots_.end() && slot->second.prepare && p->batch) adopt_batch(env, *p);
    drain_prepare_queue(env);
    return;
  }
  env.note({.kind = Note::Kind::admitted,
            .view = view_,
            .peer = *who,
            .counter = ui.counter.name,
            .value = ui.value,
            .digest = ui.msg_hash,
            .text = std::string(to_string(msg->kind()))});
  dispatch_certified(env, msg);
}

void Replica::drain_prepare_queue(Env& env) {
  if (config_.mode != Mode::prevention) return;
  while (!prepare_queue_.empty() && prepare_queue_.begin()->first < view_) prepare_queue_.erase(prepare_queue_.begin());
  if (in_vc_) return;
  auto q = prepare_queue_.find(view_);
  if (q == prepare_queue_.end()) return;
  auto& queue = q->second;
  while (!queue.empty()) {
    auto it = queue.begin();
    if (it->first < expected_prepare_seq_) {
      queue.erase(it);
      continue;
    }
    if (it->first != expected_prepare_seq_) return;
    PreparePtr p = it->second;
    queue.erase(it);
    env.note({.kind = Note::Kind::admitted,
              .view = view_,
              .peer = p->leader,
              .counter = p->ui.counter.name,
              .value = p->ui.value,
              .digest = p->ui.msg_hash,
              .text = "prepare"});
    on_prepare(env, p);
  }
}

void Replica::dispatch_certified(Env& env, const MessagePtr& msg) {
  switch (msg->kind()) {
    case MsgKind::prepare: on_prepare(env, PreparePtr(msg, &msg->as<Prepare>())); break;
    case MsgKind::commit: on_commit(env, msg->as<Commit>()); break;
    case MsgKind::checkpoint: on_checkpoint(env, msg->as<Checkpoint>()); break;
    case MsgKind::view_change: on_view_change(env, ViewChangePtr(msg, &msg->as<ViewChange>())); break;
    case MsgKind::new_view: on_new_view(env, std::shared_ptr<const NewView>(msg, &msg->as<NewView>())); break;
    default: break;
  }
}

bool Replica::check_ui(Env& env, const tc::UniqueIdentifier& ui, const Digest& hash) {
  auto status = tc::verify(ui, hash, env.directory(), env.tc());
  if (status == tc::VerifyStatus::stale_epoch) {
    env.note({.kind = Note::Kind::stale_epoch, .view = view_, .peer = ui.tc.replica, .value = ui.value});
  }
  return status == tc::VerifyStatus::valid;
}

bool Replica::check_context(const tc::UniqueIdentifier& ui, ReplicaId replica, tc::Phase phase, View view,
                            std::optional<Seq> seq) const {
  if (!ui.context || ui.tc.replica != replica) return false;
  const auto& ctx = *ui.context;
  if (ctx.phase != phase || ctx.view != view) return false;
  if (seq && ctx.seq != *seq) return false;
  return ui.counter == tc::CounterId::for_phase(replica, phase) && ui.value == ctx.seq;
}

bool Replica::verify_certified(Env& env, const Message& msg) {
  const bool prevent = config_.mode == Mode::prevention;
  switch (msg.kind()) {
    case MsgKind::prepare: {
      const auto& p = msg.as<Prepare>();
      if (p.ui.tc.replica != p.leader || p.leader >= config_.n()) return false;
      if (prevent && !check_context(p.ui, p.leader, tc::Phase::prepare, p.view, p.seq)) return false;
      return check_ui(env, p.ui, p.statement());
    }
    case MsgKind::commit: {
      const auto& c = msg.as<Commit>();
      if (c.ui.tc.replica != c.replica) return false;
      if (prevent && !check_context(c.ui, c.replica, tc::Phase::commit, c.view, c.seq)) return false;
      return check_ui(env, c.ui, c.statement());
    }
    case MsgKind::checkpoint: {
      const auto& cp = msg.as<Checkpoint>();
      if (cp.ui.tc.replica != cp.replica || config_.checkpoint_interval == 0) return false;
      if (cp.seq == 0 || cp.seq % config_.checkpoint_interval != 0) return false;
      if (prevent &&
          !check_context(cp.ui, cp.replica, tc::Phase::checkpoint, 0, cp.seq / config_.checkpoint_interval)) {
        return false;
      }
      return check_ui(env, cp.ui, cp.statement());
    }
    case MsgKind::view_change: {
      const auto& vc = msg.as<ViewChange>();
      if (vc.ui.tc.replica != vc.replica) return false;
      if (prevent && !check_context(vc.ui, vc.replica, tc::Phase::view_change, vc.new_view, std::nullopt)) {
        return false;
      }
      return check_ui(env, vc.ui, vc.statement());
    }
    case MsgKind::new_view: {
      const auto& nv = msg.as<NewView>();
      if (nv.leader != config_.leader_of(nv.view) || nv.ui.tc.replica != nv.leader) return false;
      if (prevent && !check_context(nv.ui, nv.leader, tc::Phase::new_view, nv.view, std::nullopt)) return false;
      for (std::size_t i = 0; i < nv.proposals.size(); ++i) {
        const auto& p = *nv.proposals[i];
        if (p.view != nv.view || p.leader != nv.leader || p.ui.tc.replica != nv.leader) return false;
        if (p.seq != nv.low + 1 + i) return false;
        if (prevent) {
          if (!check_context(p.ui, nv.leader, tc::Phase::prepare, nv.view, p.seq)) return false;
        } else if (p.ui.counter != nv.ui.counter || p.ui.value + (nv.proposals.size() - i) != nv.ui.value) {
          return false;
        }
        if (!check_ui(env, p.ui, p.statement())) return false;
      }
      return check_ui(env, nv.ui, nv.statement());
    }
    default: return false;
  }
}

void Replica::flag(Env& env, ReplicaId sender, const std::string& why) {
  Timeline& t = timelines_[sender];
  if (t.flagged) return;
  t.flagged = true;
  t.buffer.clear();
  env.note({.kind = Note::Kind::flagged, .view = view_, .peer = sender, .value = t.cursor, .text = why});
  if (sender == config_.leader_of(view_) && !in_vc_) start_view_change(env, view_ + 1);
}

// ---------------------------------------------------------------------------
// Normal case

void Replica::on_request(Env& env, const Request& req, const MessagePtr& msg) {
  if (!client_auth::verify(config_.client_key_seed, req)) return;
  auto done = state_.replies.find(req.client);
  if (done != state_.replies.end() && req.client_seq <= done->second.client_seq) {
    const ReplyRecord& r = done->second;
    if (req.client_seq == r.client_seq) {
      env.send(client_node(req.client), make_message(id_, Reply{req.client, r.client_seq, id_, r.view, r.seq, r.result}));
    }
    return;
  }
  auto pending = pending_.find(req.client);
  if (pending != pending_.end() && pending->second->client_seq >= req.client_seq) return;
  pending_[req.client] = RequestPtr(msg, &req);
  arrival_.emplace_back(req.client, req.digest);
  if (!timers_.count({TimerKind::suspect, 0})) arm_suspect(env);
  if (is_leader()) try_propose(env);
}

void Replica::arm_suspect(Env& env) {
  suspect_mark_ = state_.executed;
  arm(env, {TimerKind::suspect, 0}, config_.suspect_timeout);
}

Seq Replica::contiguous_committed() const {
  Seq s = std::max(state_.executed, stable_seq_);
  while (committed_.count(s + 1)) ++s;
  return s;
}

bool Replica::can_propose() const {
  if (!is_leader() || halted_) return false;
  const Seq s = next_seq_;
  const Seq c = config_.checkpoint_interval;
  if (c > 0 && (s > own_cp_seq_ + c || s > stable_seq_ + 2 * c)) return false;
  const Seq done = contiguous_committed();
  if (!config_.pipelining) return s == done + 1;
  return s <= done + config_.pipeline_depth;
}

void Replica::try_propose(Env& env) {
  while (can_propose()) {
    std::vector<RequestPtr> requests;
    for (auto it = arrival_.begin(); it != arrival_.end() && requests.size() < config_.batch_size;) {
      auto p = pending_.find(it->first);
      if (p == pending_.end() || p->second->digest != it->second) {
        it = arrival_.erase(it);
        continue;
      }
      if (!in_flight_.count(it->second)) requests.push_back(p->second);
      ++it;
    }
    if (requests.empty()) return;
    if (requests.size() < config_.batch_size) {
      if (config_.batch_timeout == 0) return;
      if (!batch_expired_) {
        if (!timers_.count({TimerKind::batch, 0})) arm(env, {TimerKind::batch, 0}, config_.batch_timeout);
        return;
      }
    }
    batch_expired_ = false;
    disarm({TimerKind::batch, 0});
    const Seq before = next_seq_;
    propose(env, Batch::make(std::move(requests)));
    if (next_seq_ == before) return;
  }
}

void Replica::propose(Env& env, BatchPtr batch) {
  const Seq s = next_seq_;
  Prepare body{view_, s, id_, batch->digest, batch, {}};
  auto ui = certify(env, tc::Phase::prepare, view_, s, body.statement());
  if (!ui) return;
  body.ui = *ui;
  prepare_counter_used_ = true;
  for (const auto& r : batch->requests) in_flight_.insert(r->digest);
  auto msg = make_message(id_, std::move(body));
  PreparePtr p(msg, &msg->as<Prepare>());
  next_seq_ = s + 1;
  expected_prepare_seq_ = next_seq_;
  slots_[{view_, s}].prepare = p;
  remember_batch(batch, s);
  sent_log_.push_back({SentEntry::Kind::prepare, *ui, view_, s, p, {}, {}});
  env.note({.kind = Note::Kind::prepared, .view = view_, .seq = s, .peer = id_, .digest = batch->digest});
  broadcast(env, msg);
  try_commit(env, view_, s);
}

void Replica::on_prepare(Env& env, const PreparePtr& p) {
  const ReplicaId leader = config_.leader_of(p->view);
  if (p->leader != leader) return;
  if (config_.mode == Mode::detection && p->view < timelines_[leader].vc_view) return;
  if (p->view != view_ || in_vc_) return;
  Slot& slot = slots_[{p->view, p->seq}];
  if (slot.prepare) {
    if (slot.prepare->batch_digest == p->batch_digest && p->batch) adopt_batch(env, *p);
    return;
  }
  if (p->seq < expected_prepare_seq_ || p->seq <= stable_seq_) return;
  expected_prepare_seq_ = p->seq + 1;
  if (p->batch && !batch_valid(*p)) {
    flag(env, leader, "invalid batch");
    return;
  }
  slot.prepare = p;
  if (p->batch) remember_batch(p->batch, p->seq);
  env.note({.kind = Note::Kind::prepared, .view = p->view, .seq = p->seq, .peer = leader, .digest = p->batch_digest});
  if (leader != id_) maybe_send_commit(env, p->view, p->seq);
  try_commit(env, p->view, p->seq);
}

void Replica::adopt_batch(Env& env, const Prepare& p) {
  if (!p.batch || find_batch(p.batch_digest) || !batch_valid(p)) return;
  remember_batch(p.batch, p.seq);
  execute_ready(env);
  if (in_vc_) maybe_build_new_view(env, vc_target_);
}

void Replica::maybe_send_commit(Env& env, View view, Seq seq) {
  if (config_.leader_of(view) == id_ || view != view_ || in_vc_) return;
  auto it = slots_.find({view, seq});
  if (it == slots_.end() || !it->second.prepare || it->second.commit_sent) return;
  const SlotKey key{view, seq};
  bool gated = !deferred_commits_.empty() && *deferred_commits_.begin() < key;
  if (!config_.pipelining && seq > 1 && contiguous_committed() < seq - 1) gated = true;
  const Seq c = config_.checkpoint_interval;
  if (c > 0 && seq > own_cp_seq_ + c) gated = true;
  if (gated) {
    deferred_commits_.insert(key);
    return;
  }
  Slot& slot = it->second;
  const Digest pd = slot.prepare->statement();
  Commit body{view, seq, id_, pd, {}};
  auto ui = certify(env, tc::Phase::commit, view, seq, body.statement());
  if (!ui) return;
  body.ui = *ui;
  slot.commit_sent = true;
  slot.commits[pd][id_] = *ui;
  sent_log_.push_back({SentEntry::Kind::commit, *ui, view, seq, slot.prepare, {}, {}});
  broadcast(env, make_message(id_, std::move(body)));
  try_commit(env, view, seq);
}

void Replica::flush_deferred_commits(Env& env) {
  while (!deferred_commits_.empty()) {
    SlotKey key = *deferred_commits_.begin();
    deferred_commits_.erase(deferred_commits_.begin());
    if (key.first != view_ || in_vc_) continue;
    maybe_send_commit(env, key.first, key.second);
    if (deferred_commits_.count(key)) return;
  }
}

void Replica::on_commit(Env& env, const Commit& c) {
  const ReplicaId r = c.replica;
  if (r == config_.leader_of(c.view) || r >= config_.n()) return;
  if (config_.mode == Mode::detection && c.view < timelines_[r].vc_view) return;
  peer_commit_high_[r] = std::max(peer_commit_high_[r], c.seq);
  if (c.view < view_ || c.seq <= stable_seq_) return;
  slots_[{c.view, c.seq}].commits[c.prepare_digest][r] = c.ui;
  try_commit(env, c.view, c.seq);
}

void Replica::try_commit(Env& env, View view, Seq seq) {
  if (view != view_ || in_vc_ || seq <= state_.executed || committed_.count(seq)) return;
  auto it = slots_.find({view, seq});
  if (it == slots_.end() || !it->second.prepare) return;
  const Slot& slot = it->second;
  const Digest pd = slot.prepare->statement();
  auto commits = slot.commits.find(pd);
  if (commits == slot.commits.end() || commits->second.size() < config_.f) return;
  CommittedEntry entry{view, slot.prepare, {slot.prepare->ui}};
  for (const auto& [r, ui] : commits->second) {
    if (entry.proof.size() == config_.quorum()) break;
    entry.proof.push_back(ui);
  }
  committed_[seq] = std::move(entry);
  env.note({.kind = Note::Kind::committed, .view = view, .seq = seq, .digest = slot.prepare->batch_digest});
  schedule_decision(env, seq);
  execute_ready(env);
  flush_deferred_commits(env);
  if (is_leader()) try_propose(env);
}

void Replica::execute_ready(Env& env) {
  bool progressed = false;
  while (true) {
    auto it = committed_.find(state_.executed + 1);
    if (it == committed_.end()) break;
    const Seq s = it->first;
    const CommittedEntry& entry = it->second;
    BatchPtr batch = entry.prepare->batch ? entry.prepare->batch : find_batch(entry.prepare->batch_digest);
    if (!batch) {
      std::vector<ReplicaId> hints;
      for (const auto& ui : entry.proof) hints.push_back(ui.tc.replica);
      ensure_fetch(env, s, entry.prepare->statement(), std::move(hints));
      break;
    }
    auto replies = state_.execute(s, entry.view, *batch);
    progressed = true;
    fetches_.erase(s);
    env.note({.kind = Note::Kind::executed, .view = entry.view, .seq = s, .digest = state_.chain});
    for (const auto& r : batch->requests) {
      in_flight_.erase(r->digest);
      auto p = pending_.find(r->client);
      auto done = state_.replies.find(r->client);
      if (p != pending_.end() && done != state_.replies.end() && p->second->client_seq <= done->second.client_seq) {
        pending_.erase(p);
      }
    }
    for (const auto& [client, rec] : replies) {
      env.send(client_node(client), make_message(id_, Reply{client, rec.client_seq, id_, rec.view, rec.seq, rec.result}));
    }
    const Seq c = config_.checkpoint_interval;
    if (c > 0 && s % c == 0) send_checkpoint(env, s);
  }
  if (progressed) {
    if (!pending_.empty()) {
      arm_suspect(env);
    } else {
      disarm({TimerKind::suspect, 0});
    }
  }
}

void Replica::ensure_fetch(Env& env, Seq seq, const Digest& prepare_digest, std::vector<ReplicaId> hints) {
  auto it = fetches_.find(seq);
  if (it != fetches_.end() && it->second.prepare_digest == prepare_digest) return;
  FetchState fs{prepare_digest, {}, 0};
  for (ReplicaId r : hints) {
    if (r != id_ && r < config_.n() && std::find(fs.sources.begin(), fs.sources.end(), r) == fs.sources.end()) {
      fs.sources.push_back(r);
    }
  }
  for (ReplicaId r = 0; r < config_.n(); ++r) {
    if (r != id_ && std::find(fs.sources.begin(), fs.sources.end(), r) == fs.sources.end()) fs.sources.push_back(r);
  }
  fetches_[seq] = std::move(fs);
  arm(env, {TimerKind::fetch, seq}, config_.fetch_timeout);
}

void Replica::on_fetch_request(Env& env, NodeId from, const FetchRequest& fr) {
  if (from >= config_.n() || from == id_) return;
  auto answer = [&](const PreparePtr& p) {
    if (!p || p->seq != fr.seq || p->statement() != fr.prepare_digest) return false;
    BatchPtr batch = p->batch ? p->batch : find_batch(p->batch_digest);
    if (!batch) return false;
    auto full = std::make_shared<Prepare>(*p);
    full->batch = batch;
    env.send(from, make_message(id_, FetchReply{full, id_}));
    return true;
  };
  for (auto it = slots_.lower_bound({0, 0}); it != slots_.end(); ++it) {
    if (it->first.second == fr.seq && answer(it->second.prepare)) return;
  }
  if (auto c = committed_.find(fr.seq); c != committed_.end() && answer(c->second.prepare)) return;
  for (const auto& [view, vcs] : view_changes_) {
    for (const auto& [r, vc] : vcs) {
      for (const auto& e : vc->log) {
        if (answer(e.prepare)) return;
      }
      for (const auto& d : vc->decided) {
        if (answer(d.prepare)) return;
      }
    }
  }
}

void Replica::on_fetch_reply(Env& env, const FetchReply& fr) {
  if (!fr.prepare || !fr.prepare->batch) return;
  const Prepare& p = *fr.prepare;
  auto it = fetches_.find(p.seq);
  if (it == fetches_.end() || it->second.prepare_digest != p.statement() || !batch_valid(p)) return;
  fetches_.erase(it);
  disarm({TimerKind::fetch, p.seq});
  remember_batch(p.batch, p.seq);
  execute_ready(env);
  if (in_vc_) maybe_build_new_view(env, vc_target_);
}

BatchPtr Replica::find_batch(const Digest& batch_digest) const {
  auto it = batches_.find(batch_digest);
  return it == batches_.end() ? nullptr : it->second.first;
}

void Replica::remember_batch(const BatchPtr& batch, Seq seq) {
  auto& slot = batches_[batch->digest];
  slot.first = batch;
  slot.second = std::max(slot.second, seq);
}

bool Replica::batch_valid(const Prepare& p) const {
  if (!p.batch || p.batch->digest != p.batch_digest) return false;
  if (Batch::make(p.batch->requests)->digest != p.batch_digest) return false;
  return std::all_of(p.batch->requests.begin(), p.batch->requests.end(),
                     [&](const RequestPtr& r) { return r && client_auth::verify(config_.client_key_seed, *r); });
}

// ---------------------------------------------------------------------------
// Decisions

void Replica::schedule_decision(Env& env, Seq seq) {
  if (!config_.decisions) return;
  const CommittedEntry& entry = committed_.at(seq);
  if (config_.leader_of(entry.view) == id_) return;
  if (config_.decision_delay == 0) {
    send_decisions(env, seq, false);
  } else {
    arm(env, {TimerKind::decision, seq}, config_.decision_delay);
  }
}

void Replica::send_decisions(Env& env, Seq seq, bool suppress) {
  auto it = committed_.find(seq);
  if (it == committed_.end()) return;
  const CommittedEntry& entry = it->second;
  const ReplicaId leader = config_.leader_of(entry.view);
  MessagePtr msg;
  std::uint64_t sent = 0;
  std::uint64_t suppressed = 0;
  for (ReplicaId r = 0; r < config_.n(); ++r) {
    if (r == id_ || r == leader) continue;
    if (suppress && has_evidence(seq, r)) {
      ++suppressed;
      continue;
    }
    if (!msg) msg = make_message(id_, Decision{entry.view, seq, entry.prepare->batch_digest, id_, entry.proof});
    env.send(r, msg);
    ++sent;
  }
  if (sent > 0) env.note({.kind = Note::Kind::decision_sent, .view = entry.view, .seq = seq, .value = sent});
  if (suppressed > 0) {
    env.note({.kind = Note::Kind::decision_suppressed, .view = entry.view, .seq = seq, .value = suppressed});
  }
}

bool Replica::has_evidence(Seq seq, ReplicaId peer) const {
  if (auto d = decided_from_.find(seq); d != decided_from_.end() && d->second.count(peer)) return true;
  if (!config_.pipelining && peer_commit_high_[peer] > seq) return true;
  const CommittedEntry& entry = committed_.at(seq);
  auto slot = slots_.find({entry.view, seq});
  if (slot == slots_.end()) return false;
  auto commits = slot->second.commits.find(entry.prepare->statement());
  return commits != slot->second.commits.end() && commits->second.size() == 2 * config_.f;
}

void Replica::on_decision(Env& env, const Decision& d) {
  if (d.sender >= config_.n() || d.sender == id_) return;
  if (d.seq > stable_seq_) decided_from_[d.seq].insert(d.sender);
  const ReplicaId leader = config_.leader_of(d.view);
  if (leader == id_) return;
  if (d.seq <= state_.executed || committed_.count(d.seq)) return;
  if (d.view != view_) return;
  if (d.proof.size() != config_.quorum()) return;

  const Digest pd = prepare_statement(d.view, d.seq, d.batch_digest);
  std::set<ReplicaId> seen;
  bool has_leader = false;
  std::vector<MessagePtr> attestations;
  for (const auto& ui : d.proof) {
    const ReplicaId r = ui.tc.replica;
    if (r >= config_.n() || !seen.insert(r).second) return;
    if (r == leader) {
      if (ui.msg_hash != pd) return;
      has_leader = true;
      attestations.push_back(make_message(r, Prepare{d.view, d.seq, r, d.batch_digest, nullptr, ui}));
    } else {
      Commit c{d.view, d.seq, r, pd, ui};
      if (ui.msg_hash != c.statement()) return;
      attestations.push_back(make_message(r, std::move(c)));
    }
  }
  if (!has_leader) return;
  if (in_vc_) {
    // Mid view change the proof is taken as a commit certificate directly.
    for (const auto& m : attestations) {
      if (!verify_certified(env, *m)) return;
    }
    const auto& lead = *std::find_if(attestations.begin(), attestations.end(),
                                     [](const MessagePtr& m) { return m->kind() == MsgKind::prepare; });
    PreparePtr prepare(lead, &lead->as<Prepare>());
    env.note({.kind = Note::Kind::decision_accepted, .view = d.view, .seq = d.seq, .peer = d.sender});
    committed_[d.seq] = CommittedEntry{d.view, prepare, d.proof};
    env.note({.kind = Note::Kind::committed, .view = d.view, .seq = d.seq, .digest = d.batch_digest});
    execute_ready(env);
    maybe_build_new_view(env, vc_target_);
    return;
  }
  env.note({.kind = Note::Kind::decision_accepted, .view = d.view, .seq = d.seq, .peer = d.sender});
  for (const auto& m : attestations) {
    if (m->from != id_) intake_certified(env, m);
  }
}

// ---------------------------------------------------------------------------
// Trusted component and plumbing

std::optional<tc::UniqueIdentifier> Replica::certify(Env& env, tc::Phase phase, View view, Seq seq,
                                                     const Digest& hash) {
  auto& component = env.tc();
  try {
    if (config_.mode == Mode::detection) return component.create_ui(hash);
    try {
      return component.certify({phase, view, seq}, hash);
    } catch (const tc::TcError& e) {
      if (e.code() != tc::TcErrc::out_of_order) throw;
      auto skip = component.skip_to(phase, view, seq);
      sent_log_.push_back({SentEntry::Kind::skip, {}, view, seq, nullptr, {}, skip});
      return component.certify({phase, view, seq}, hash);
    }
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
    env.note({.kind = Note::Kind::tc_refused, .view = view, .seq = seq, .text = e.what()});
    return std::nullopt;
  }
}

void Replica::broadcast(Env& env, const MessagePtr& msg, std::optional<ReplicaId> skip) {
  for (ReplicaId r = 0; r < config_.n(); ++r) {
    if (r != id_ && (!skip || r != *skip)) env.send(r, msg);
  }
}

std::uint64_t Replica::arm(Env& env, TimerKey key, TimeNs delay) {
  const std::uint64_t token = ++next_token_;
  timers_[key] = token;
  env.arm_timer(key, delay, token);
  return token;
}

bool Replica::timer_live(TimerKey key, std::uint64_t token) const {
  auto it = timers_.find(key);
  return it != timers_.end() && it->second == token;
}

Digest Replica::fingerprint() const {
  Encoder e;
  e.u32(id_).u8(halted_ ? 1 : 0).u64(view_).u8(in_vc_ ? 1 : 0).u64(vc_target_);
  e.u64(expected_prepare_seq_).u64(next_seq_).u8(batch_expired_ ? 1 : 0);
  e.digest(state_.digest()).u64(stable_seq_).u64(own_cp_seq_);
  for (const auto& t : timelines_) {
    e.u64(t.counter.name).u64(t.cursor).u64(t.vc_view).u8(t.flagged ? 1 : 0);
    for (const auto& [value, msg] : t.buffer) e.u64(value);
  }
  e.u32(static_cast<std::uint32_t>(slots_.size()));
  for (const auto& [key, slot] : slots_) {
    e.u64(key.first).u64(key.second).u8(slot.commit_sent ? 1 : 0);
    if (slot.prepare) e.digest(slot.prepare->batch_digest).u8(slot.prepare->batch ? 1 : 0);
    for (const auto& [d, who] : slot.commits) {
      e.digest(d);
      for (const auto& [r, ui] : who) e.u32(r);
    }
  }
  for (const auto& [seq, entry] : committed_) e.u64(seq).u64(entry.view);
  for (const auto& [client, req] : pending_) e.u32(client).u64(req->client_seq);
  for (const auto& key : deferred_commits_) e.u64(key.first).u64(key.second);
  for (const auto& [key, token] : timers_) e.u8(static_cast<std::uint8_t>(key.kind)).u64(key.a);
  for (View v : highest_vc_) e.u64(v);
  for (const auto& [seq, who] : decided_from_) {
    e.u64(seq);
    for (ReplicaId r : who) e.u32(r);
  }
  for (const auto& [view, vcs] : view_changes_) {
    e.u64(view);
    for (const auto& [r, vc] : vcs) e.u32(r);
  }
  for (const auto& [seq, who] : checkpoints_) {
    e.u64(seq);
    for (const auto& [r, cp] : who) e.u32(r).digest(cp.state_digest);
  }
  for (const auto& [seq, fs] : fetches_) e.u64(seq).u64(fs.next);
  for (const auto& [view, queue] : prepare_queue_) {
    for (const auto& [seq, p] : queue) e.u64(view).u64(seq).digest(p->batch_digest);
  }
  return e.hash();
}

}  // namespace tcbft::protocol
