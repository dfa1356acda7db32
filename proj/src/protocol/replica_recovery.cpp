#include <algorithm>

#include "tcbft/protocol/replica.hpp"

namespace tcbft::protocol {

// ---------------------------------------------------------------------------
// Checkpoints and state transfer

void Replica::send_checkpoint(Env& env, Seq seq) {
  const Seq c = config_.checkpoint_interval;
  if (c == 0 || seq % c != 0 || own_checkpoints_.count(seq)) return;
  Checkpoint cp{seq, state_.digest(), id_, {}};
  auto ui = certify(env, tc::Phase::checkpoint, 0, seq / c, cp.statement());
  if (!ui) return;
  cp.ui = *ui;
  own_cp_seq_ = std::max(own_cp_seq_, seq);
  own_checkpoints_[seq] = cp;
  snapshots_[seq] = state_.encode();
  sent_log_.push_back({SentEntry::Kind::checkpoint, *ui, 0, seq, nullptr, cp.state_digest, {}});
  checkpoints_[seq][id_] = cp;
  broadcast(env, make_message(id_, cp));
  check_stable(env, seq);
  flush_deferred_commits(env);
  if (is_leader()) try_propose(env);
}

void Replica::on_checkpoint(Env& env, const Checkpoint& cp) {
  if (cp.seq <= stable_seq_) return;
  checkpoints_[cp.seq][cp.replica] = cp;
  check_stable(env, cp.seq);
}

void Replica::check_stable(Env& env, Seq seq) {
  if (seq <= stable_seq_) return;
  auto cps = checkpoints_.find(seq);
  if (cps == checkpoints_.end()) return;
  auto own = own_checkpoints_.find(seq);
  if (own == own_checkpoints_.end()) {
    std::map<Digest, std::size_t> votes;
    for (const auto& [r, cp] : cps->second) {
      if (++votes[cp.state_digest] == config_.quorum() && seq > state_.executed) {
        arm(env, {TimerKind::state, seq}, config_.fetch_timeout);
      }
    }
    return;
  }
  std::vector<Checkpoint> proof{own->second};
  for (const auto& [r, cp] : cps->second) {
    if (r != id_ && cp.state_digest == own->second.state_digest && proof.size() < config_.quorum()) {
      proof.push_back(cp);
    }
  }
  if (proof.size() == config_.quorum()) make_stable(env, seq, own->second.state_digest, std::move(proof));
}

void Replica::make_stable(Env& env, Seq seq, const Digest& digest, std::vector<Checkpoint> proof) {
  stable_seq_ = seq;
  stable_digest_ = digest;
  const auto& checkpoint_votes = checkpoints_.at(seq);

  // Per-sender anchors: certificates up to a sender's own checkpoint are settled.
  for (const auto& [r, cp] : checkpoint_votes) {
    if (r >= timelines_.size() || cp.ui.counter != timelines_[r].counter) continue;
    auto& admitted = timelines_[r].admitted;
    admitted.erase(admitted.begin(), admitted.upper_bound(cp.ui.value));
  }
  stable_proof_ = std::move(proof);

  for (auto it = slots_.begin(); it != slots_.end();) {
    it = it->first.second <= seq ? slots_.erase(it) : std::next(it);
  }
  committed_.erase(committed_.begin(), committed_.upper_bound(seq));
  checkpoints_.erase(checkpoints_.begin(), checkpoints_.lower_bound(seq));
  own_checkpoints_.erase(own_checkpoints_.begin(), own_checkpoints_.lower_bound(seq));
  snapshots_.erase(snapshots_.begin(), snapshots_.lower_bound(seq));
  fetches_.erase(fetches_.begin(), fetches_.upper_bound(seq));
  decided_from_.erase(decided_from_.begin(), decided_from_.upper_bound(seq));
  for (auto it = deferred_commits_.begin(); it != deferred_commits_.end();) {
    it = it->second <= seq ? deferred_commits_.erase(it) : std::next(it);
  }
  for (auto it = batches_.begin(); it != batches_.end();) {
    it = it->second.second <= seq ? batches_.erase(it) : std::next(it);
  }

  // Keep only what this replica certified after its own checkpoint at seq.
  const auto anchor = std::find_if(sent_log_.begin(), sent_log_.end(), [&](const SentEntry& e) {
    return e.kind == SentEntry::Kind::checkpoint && e.seq == seq;
  });
  if (anchor != sent_log_.end()) {
    std::vector<SentEntry> kept;
    for (auto it = sent_log_.begin(); it != anchor; ++it) {
      if (it->kind == SentEntry::Kind::skip && it->skip && it->skip->to.value > seq) kept.push_back(*it);
    }
    kept.insert(kept.end(), std::next(anchor), sent_log_.end());
    sent_log_ = std::move(kept);
  }

  const auto& own = own_checkpoints_.at(seq);
  const std::uint64_t low = config_.mode == Mode::detection ? own.ui.value : seq;
  try {
    env.tc().advance_window(low);
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
  }
  env.note({.kind = Note::Kind::stable, .view = view_, .seq = seq, .digest = digest});
  flush_deferred_commits(env);
  if (is_leader()) try_propose(env);
}

void Replica::request_state(Env& env, Seq seq, const Digest& digest, std::vector<ReplicaId> sources) {
  if (state_target_ && state_target_->seq >= seq) return;
  sources.erase(std::remove(sources.begin(), sources.end(), id_), sources.end());
  if (sources.empty()) return;
  state_target_ = StateTarget{seq, digest, std::move(sources), 0};
  env.send(state_target_->sources.front(), make_message(id_, StateRequest{seq, id_}));
  arm(env, {TimerKind::state, 0}, config_.fetch_timeout);
}

void Replica::on_state_request(Env& env, NodeId from, const StateRequest& sr) {
  if (from >= config_.n() || from == id_) return;
  auto it = snapshots_.find(sr.seq);
  if (it == snapshots_.end()) return;
  env.send(from, make_message(id_, StateReply{sr.seq, id_, it->second}));
}

void Replica::on_state_reply(Env& env, const StateReply& sr) {
  if (!state_target_ || sr.seq != state_target_->seq) return;
  auto incoming = ExecutionState::decode(sr.state);
  if (!incoming || incoming->executed != sr.seq || incoming->digest() != state_target_->digest) return;
  state_target_.reset();
  disarm({TimerKind::state, 0});
  if (incoming->executed <= state_.executed) return;
  state_ = std::move(*incoming);
  env.note({.kind = Note::Kind::state_transfer, .view = view_, .seq = state_.executed, .digest = state_.chain});
  for (auto it = pending_.begin(); it != pending_.end();) {
    auto done = state_.replies.find(it->first);
    it = done != state_.replies.end() && it->second->client_seq <= done->second.client_seq ? pending_.erase(it)
                                                                                           : std::next(it);
  }
  committed_.erase(committed_.begin(), committed_.upper_bound(state_.executed));
  fetches_.erase(fetches_.begin(), fetches_.upper_bound(state_.executed));
  expected_prepare_seq_ = std::max(expected_prepare_seq_, state_.executed + 1);
  send_checkpoint(env, state_.executed);
  execute_ready(env);
  drain_prepare_queue(env);
}

// ---------------------------------------------------------------------------
// View change

void Replica::start_view_change(Env& env, View target) {
  if (target <= view_) return;
  if (in_vc_ && target <= vc_target_) return;
  in_vc_ = true;
  vc_target_ = target;
  disarm({TimerKind::suspect, 0});
  disarm({TimerKind::batch, 0});
  deferred_commits_.clear();

  ViewChange vc;
  vc.new_view = target;
  vc.replica = id_;
  vc.stable_seq = stable_seq_;
  vc.stable_digest = stable_digest_;
  vc.stable_proof = stable_proof_;
  for (const auto& [seq, entry] : committed_) {
    if (seq > stable_seq_) vc.decided.push_back({entry.view, seq, entry.prepare, entry.proof});
  }
  try {
    if (config_.mode == Mode::prevention) {
      vc.fence = env.tc().skip_to(tc::Phase::commit, target, 0);
      if (prepare_counter_used_) vc.prepare_fence = env.tc().skip_to(tc::Phase::prepare, target, 0);
    }
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
    env.note({.kind = Note::Kind::tc_refused, .view = target, .text = e.what()});
    return;
  }
  vc.log = sent_log_;
  auto ui = certify(env, tc::Phase::view_change, target, vc_count_ + 1, vc.statement());
  if (!ui) return;
  ++vc_count_;
  vc.ui = *ui;
  sent_log_.push_back({SentEntry::Kind::stub, *ui, target, 0, nullptr, {}, {}});
  auto msg = make_message(id_, std::move(vc));
  ViewChangePtr own(msg, &msg->as<ViewChange>());
  view_changes_[target][id_] = own;
  highest_vc_[id_] = std::max(highest_vc_[id_], target);
  env.note({.kind = Note::Kind::view_change,
            .view = target,
            .peer = config_.leader_of(view_),
            .value = cursor_of(config_.leader_of(view_))});
  broadcast(env, msg);

  const View steps = std::min<View>(target - view_ - 1, 10);
  arm(env, {TimerKind::view_change, target}, config_.view_change_timeout << steps);
  maybe_build_new_view(env, target);
}

void Replica::on_view_change(Env& env, const ViewChangePtr& vc) {
  const ReplicaId sender = vc->replica;
  if (sender >= config_.n()) return;
  Timeline& t = timelines_[sender];
  t.vc_view = std::max(t.vc_view, vc->new_view);
  if (vc->new_view <= view_) return;
  if (!validate_view_change(env, *vc)) return;
  view_changes_[vc->new_view][sender] = vc;
  highest_vc_[sender] = std::max(highest_vc_[sender], vc->new_view);
  maybe_join(env);
  maybe_build_new_view(env, vc->new_view);
}

namespace {

bool covers(const std::vector<SentEntry>& log, SentEntry::Kind kind, const tc::SkipAttestation& fence, Seq low) {
  const View view = fence.from.view;
  for (Seq s = low + 1; s < fence.from.value; ++s) {
    bool found = std::any_of(log.begin(), log.end(), [&](const SentEntry& e) {
      if (e.kind == kind && e.view == view && e.seq == s) return true;
      return e.kind == SentEntry::Kind::skip && e.skip && e.skip->counter == fence.counter &&
             e.skip->voids({view, s});
    });
    if (!found) return false;
  }
  return true;
}

}  // namespace

bool Replica::validate_view_change(Env& env, const ViewChange& vc) {
  const ReplicaId sender = vc.replica;
  const bool prevent = config_.mode == Mode::prevention;
  const Seq interval = config_.checkpoint_interval;

  // Stable checkpoint proof, which must include the sender's own checkpoint.
  std::uint64_t anchor = 0;
  if (vc.stable_seq > 0) {
    if (interval == 0 || vc.stable_proof.size() != config_.quorum()) return false;
    std::set<ReplicaId> signers;
    for (const auto& cp : vc.stable_proof) {
      if (cp.seq != vc.stable_seq || cp.state_digest != vc.stable_digest || cp.ui.tc.replica != cp.replica) return false;
      if (cp.replica >= config_.n() || !signers.insert(cp.replica).second) return false;
      if (prevent && !check_context(cp.ui, cp.replica, tc::Phase::checkpoint, 0, cp.seq / interval)) return false;
      if (!check_ui(env, cp.ui, cp.statement())) return false;
      if (cp.replica == sender) anchor = cp.ui.value;
    }
    if (!signers.count(sender)) return false;
  } else if (!vc.stable_proof.empty()) {
    return false;
  }

  std::uint64_t expected = anchor + 1;
  for (const auto& e : vc.log) {
    if (e.kind == SentEntry::Kind::skip) {
      if (!prevent || !e.skip || e.skip->tc.replica != sender) return false;
      if (tc::verify(*e.skip, env.directory(), env.tc()) != tc::VerifyStatus::valid) return false;
      continue;
    }
    const auto& ui = e.ui;
    if (ui.tc.replica != sender) return false;
    if (!prevent) {
      if (ui.counter != vc.ui.counter || ui.value != expected) return false;
      ++expected;
    }
    Digest statement = ui.msg_hash;
    switch (e.kind) {
      case SentEntry::Kind::prepare:
        if (!e.prepare || e.prepare->leader != sender || e.prepare->leader != config_.leader_of(e.prepare->view)) {
          return false;
        }
        if (e.view != e.prepare->view || e.seq != e.prepare->seq) return false;
        if (prevent && !check_context(ui, sender, tc::Phase::prepare, e.view, e.seq)) return false;
        statement = e.prepare->statement();
        break;
      case SentEntry::Kind::commit: {
        if (!e.prepare || e.view != e.prepare->view || e.seq != e.prepare->seq) return false;
        const ReplicaId leader = config_.leader_of(e.view);
        if (e.prepare->leader != leader || e.prepare->ui.tc.replica != leader) return false;
        if (prevent && !check_context(ui, sender, tc::Phase::commit, e.view, e.seq)) return false;
        if (!check_ui(env, e.prepare->ui, e.prepare->statement())) return false;
        statement = commit_statement(e.view, e.seq, sender, e.prepare->statement());
        break;
      }
      case SentEntry::Kind::checkpoint:
        if (interval == 0 || e.seq == 0 || e.seq % interval != 0) return false;
        if (prevent && !check_context(ui, sender, tc::Phase::checkpoint, 0, e.seq / interval)) return false;
        statement = Checkpoint{e.seq, e.digest, sender, {}}.statement();
        break;
      case SentEntry::Kind::stub:
      case SentEntry::Kind::skip: break;
    }
    if (!check_ui(env, ui, statement)) return false;
  }
  if (!prevent && expected != vc.ui.value) return false;

  if (prevent) {
    if (!vc.fence || vc.fence->tc.replica != sender ||
        vc.fence->counter != tc::CounterId::for_phase(sender, tc::Phase::commit) ||
        vc.fence->to != tc::Position{vc.new_view, 0}) {
      return false;
    }
    if (tc::verify(*vc.fence, env.directory(), env.tc()) != tc::VerifyStatus::valid) return false;
    if (!covers(vc.log, SentEntry::Kind::commit, *vc.fence, vc.stable_seq)) return false;
    if (vc.prepare_fence) {
      const auto& pf = *vc.prepare_fence;
      if (pf.tc.replica != sender || pf.counter != tc::CounterId::for_phase(sender, tc::Phase::prepare) ||
          pf.to != tc::Position{vc.new_view, 0}) {
        return false;
      }
      if (tc::verify(pf, env.directory(), env.tc()) != tc::VerifyStatus::valid) return false;
      if (!covers(vc.log, SentEntry::Kind::prepare, pf, vc.stable_seq)) return false;
    }
  }

  for (const auto& d : vc.decided) {
    if (!d.prepare || d.seq <= vc.stable_seq || d.prepare->seq != d.seq || d.prepare->view != d.view) return false;
    const ReplicaId leader = config_.leader_of(d.view);
    if (d.prepare->leader != leader || d.proof.size() != config_.quorum()) return false;
    const Digest pd = d.prepare->statement();
    std::set<ReplicaId> seen;
    bool has_leader = false;
    for (const auto& ui : d.proof) {
      const ReplicaId r = ui.tc.replica;
      if (r >= config_.n() || !seen.insert(r).second) return false;
      Digest statement = r == leader ? pd : commit_statement(d.view, d.seq, r, pd);
      if (r == leader) has_leader = true;
      if (prevent && !check_context(ui, r, r == leader ? tc::Phase::prepare : tc::Phase::commit, d.view, d.seq)) {
        return false;
      }
      if (!check_ui(env, ui, statement)) return false;
    }
    if (!has_leader) return false;
  }
  return true;
}

void Replica::maybe_join(Env& env) {
  const View floor = in_vc_ ? vc_target_ : view_;
  std::vector<View> ahead;
  for (ReplicaId r = 0; r < config_.n(); ++r) {
    if (r != id_ && highest_vc_[r] > floor) ahead.push_back(highest_vc_[r]);
  }
  // A replica that already suspects the leader counts itself towards the f+1.
  const std::size_t needed = in_vc_ ? config_.f : config_.quorum();
  if (ahead.size() < needed) return;
  std::sort(ahead.begin(), ahead.end(), std::greater<>());
  start_view_change(env, ahead[needed - 1]);
}

std::map<Seq, Replica::Candidate> Replica::choose_proposals(const std::vector<ViewChangePtr>& proofs, Seq low) const {
  auto better = [](const Candidate& a, const Candidate& b) {
    return a.view != b.view ? a.view > b.view : a.ui_value < b.ui_value;
  };
  auto consider = [&](std::map<Seq, Candidate>& into, Seq seq, const PreparePtr& p) {
    Candidate c{p->view, p->ui.value, p};
    auto [it, inserted] = into.try_emplace(seq, c);
    if (!inserted && better(c, it->second)) it->second = c;
  };
  std::map<Seq, Candidate> logged;
  std::map<Seq, Candidate> decided;
  for (const auto& vc : proofs) {
    for (const auto& e : vc->log) {
      if ((e.kind == SentEntry::Kind::prepare || e.kind == SentEntry::Kind::commit) && e.prepare && e.seq > low) {
        consider(logged, e.seq, e.prepare);
      }
    }
    for (const auto& d : vc->decided) {
      if (d.seq > low) consider(decided, d.seq, d.prepare);
    }
  }
  for (const auto& [seq, c] : decided) logged[seq] = c;
  std::map<Seq, Candidate> out;
  if (logged.empty()) return out;
  const Seq high = logged.rbegin()->first;
  for (Seq s = low + 1; s <= high; ++s) {
    auto it = logged.find(s);
    out[s] = it == logged.end() ? Candidate{} : it->second;
  }
  return out;
}

void Replica::maybe_build_new_view(Env& env, View target) {
  if (config_.leader_of(target) != id_ || !in_vc_ || vc_target_ != target) return;
  auto vcs = view_changes_.find(target);
  if (vcs == view_changes_.end() || vcs->second.size() < config_.quorum() || !vcs->second.count(id_)) return;

  std::vector<ViewChangePtr> chosen{vcs->second.at(id_)};
  for (const auto& [r, vc] : vcs->second) {
    if (r != id_ && chosen.size() < config_.quorum()) chosen.push_back(vc);
  }
  Seq low = 0;
  for (const auto& vc : chosen) low = std::max(low, vc->stable_seq);
  auto plan = choose_proposals(chosen, low);

  bool missing = false;
  for (const auto& [seq, c] : plan) {
    if (!c.prepare || c.prepare->batch || find_batch(c.prepare->batch_digest)) continue;
    std::vector<ReplicaId> hints;
    for (const auto& vc : chosen) hints.push_back(vc->replica);
    ensure_fetch(env, seq, c.prepare->statement(), std::move(hints));
    missing = true;
  }
  if (missing) return;

  NewView nv;
  nv.view = target;
  nv.leader = id_;
  nv.low = low;
  nv.proofs = chosen;
  try {
    if (config_.mode == Mode::prevention) {
      nv.prepare_skip = env.tc().skip_to(tc::Phase::prepare, target, low + 1);
      sent_log_.push_back({SentEntry::Kind::skip, {}, target, low + 1, nullptr, {}, nv.prepare_skip});
      prepare_counter_used_ = true;
    }
  } catch (const tc::TcError& e) {
    if (e.code() == tc::TcErrc::unavailable) halted_ = true;
    env.note({.kind = Note::Kind::tc_refused, .view = target, .text = e.what()});
    return;
  }
  const BatchPtr empty = Batch::make({});
  for (const auto& [seq, c] : plan) {
    BatchPtr batch = !c.prepare ? empty : c.prepare->batch ? c.prepare->batch : find_batch(c.prepare->batch_digest);
    auto p = std::make_shared<Prepare>(Prepare{target, seq, id_, batch->digest, batch, {}});
    auto ui = certify(env, tc::Phase::prepare, target, seq, p->statement());
    if (!ui) return;
    p->ui = *ui;
    sent_log_.push_back({SentEntry::Kind::prepare, *ui, target, seq, p, {}, {}});
    nv.proposals.push_back(p);
  }
  auto ui = certify(env, tc::Phase::new_view, target, nv_count_ + 1, nv.statement());
  if (!ui) return;
  ++nv_count_;
  nv.ui = *ui;
  sent_log_.push_back({SentEntry::Kind::stub, *ui, target, 0, nullptr, {}, {}});
  auto msg = make_message(id_, std::move(nv));
  broadcast(env, msg);
  install_view(env, msg->as<NewView>());
}

void Replica::on_new_view(Env& env, const std::shared_ptr<const NewView>& nv) {
  const bool wanted = in_vc_ ? nv->view >= vc_target_ : nv->view > view_;
  if (!wanted) return;
  if (!validate_new_view(env, *nv)) {
    start_view_change(env, nv->view + 1);
    return;
  }
  install_view(env, *nv);
}

bool Replica::validate_new_view(Env& env, const NewView& nv) {
  if (nv.proofs.size() != config_.quorum()) return false;
  std::set<ReplicaId> senders;
  Seq low = 0;
  for (const auto& vc : nv.proofs) {
    if (!vc || vc->new_view != nv.view || !senders.insert(vc->replica).second) return false;
    auto known = view_changes_.find(nv.view);
    bool cached = known != view_changes_.end() && known->second.count(vc->replica) &&
                  known->second.at(vc->replica)->statement() == vc->statement();
    if (!cached) {
      if (vc->ui.tc.replica != vc->replica || !check_ui(env, vc->ui, vc->statement())) return false;
      if (config_.mode == Mode::prevention &&
          !check_context(vc->ui, vc->replica, tc::Phase::view_change, vc->new_view, std::nullopt)) {
        return false;
      }
      if (!validate_view_change(env, *vc)) return false;
    }
    low = std::max(low, vc->stable_seq);
  }
  if (!senders.count(nv.leader) || nv.low != low) return false;

  auto plan = choose_proposals(nv.proofs, low);
  if (plan.size() != nv.proposals.size()) return false;
  const Digest empty = Batch::make({})->digest;
  std::size_t i = 0;
  for (const auto& [seq, c] : plan) {
    const auto& p = *nv.proposals[i++];
    if (p.seq != seq || p.view != nv.view || p.leader != nv.leader) return false;
    if (p.batch_digest != (c.prepare ? c.prepare->batch_digest : empty)) return false;
    if (!batch_valid(p)) return false;
  }
  return true;
}

void Replica::install_view(Env& env, const NewView& nv) {
  view_ = nv.view;
  in_vc_ = false;
  vc_target_ = view_;
  for (auto it = timers_.begin(); it != timers_.end();) {
    it = it->first.kind == TimerKind::view_change && it->first.a <= view_ ? timers_.erase(it) : std::next(it);
  }
  deferred_commits_.clear();
  in_flight_.clear();
  batch_expired_ = false;
  const Seq last = nv.low + nv.proposals.size();
  expected_prepare_seq_ = last + 1;
  next_seq_ = last + 1;
  for (const auto& p : nv.proposals) {
    Slot& slot = slots_[{view_, p->seq}];
    slot.prepare = p;
    remember_batch(p->batch, p->seq);
  }
  env.note({.kind = Note::Kind::new_view, .view = view_, .seq = last, .peer = nv.leader, .value = nv.low});

  if (state_.executed < nv.low) {
    for (const auto& vc : nv.proofs) {
      if (vc->stable_seq != nv.low) continue;
      std::vector<ReplicaId> sources;
      for (const auto& cp : vc->stable_proof) sources.push_back(cp.replica);
      request_state(env, nv.low, vc->stable_digest, std::move(sources));
      break;
    }
  }
  view_changes_.erase(view_changes_.begin(), view_changes_.upper_bound(view_));

  const bool leading = config_.leader_of(view_) == id_;
  for (const auto& p : nv.proposals) {
    if (!leading) maybe_send_commit(env, view_, p->seq);
    try_commit(env, view_, p->seq);
  }
  if (!pending_.empty()) arm_suspect(env);
  drain_prepare_queue(env);
  if (leading) try_propose(env);
}

}  // namespace tcbft::protocol
