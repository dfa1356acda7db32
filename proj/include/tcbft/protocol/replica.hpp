#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "tcbft/protocol/config.hpp"
#include "tcbft/protocol/env.hpp"
#include "tcbft/protocol/service.hpp"

namespace tcbft::protocol {

/// One replica of the 2f+1 group. The object holds protocol state only;
/// everything it needs from the outside (clock, network, its trusted
/// component) comes through the Env passed to each handler. Copies are
/// independent, which the simulator's state exploration relies on.
class Replica {
 public:
  Replica(ReplicaId id, ProtocolConfig config);

  void on_message(Env& env, const MessagePtr& msg);
  void on_timer(Env& env, TimerKey key, std::uint64_t token);

  ReplicaId id() const { return id_; }
  View view() const { return view_; }
  bool in_view_change() const { return in_vc_; }
  View view_change_target() const { return vc_target_; }
  bool is_leader() const { return !in_vc_ && config_.leader_of(view_) == id_; }
  bool halted() const { return halted_; }
  Seq executed() const { return state_.executed; }
  Seq stable_seq() const { return stable_seq_; }
  const ExecutionState& state() const { return state_; }
  const ProtocolConfig& config() const { return config_; }

  /// Highest counter value admitted from `sender` (detection mode).
  std::uint64_t cursor_of(ReplicaId sender) const;
  bool has_flagged(ReplicaId sender) const;
  std::size_t pending_requests() const { return pending_.size(); }

  /// Digest of the protocol-relevant state, used to prune explored states.
  Digest fingerprint() const;

 private:
  struct Timeline {
    tc::CounterId counter;
    std::uint64_t cursor = 0;
    std::map<std::uint64_t, MessagePtr> buffer;     // keyed by first counter value
    std::map<std::uint64_t, Digest> admitted;       // counter value -> certified hash
    View vc_view = 0;                               // highest view change admitted
    bool flagged = false;
  };

  struct Slot {
    PreparePtr prepare;
    std::map<Digest, std::map<ReplicaId, tc::UniqueIdentifier>> commits;  // by prepare digest
    bool commit_sent = false;
  };

  struct CommittedEntry {
    View view = 0;
    PreparePtr prepare;
    std::vector<tc::UniqueIdentifier> proof;
  };

  struct FetchState {
    Digest prepare_digest;
    std::vector<ReplicaId> sources;
    std::size_t next = 0;
  };

  struct StateTarget {
    Seq seq = 0;
    Digest digest;
    std::vector<ReplicaId> sources;
    std::size_t next = 0;
  };

  struct Candidate {
    View view = 0;
    std::uint64_t ui_value = 0;
    PreparePtr prepare;
  };

  using SlotKey = std::pair<View, Seq>;

  // Intake and admission.
  void intake_certified(Env& env, const MessagePtr& msg);
  void intake_detection(Env& env, const MessagePtr& msg);
  void intake_prevention(Env& env, const MessagePtr& msg);
  void drain_timeline(Env& env, ReplicaId sender);
  void drain_prepare_queue(Env& env);
  std::optional<std::string> conflict(const Message& msg) const;
  void adopt_batch(Env& env, const Prepare& p);
  void admit(Env& env, ReplicaId sender, const MessagePtr& msg);
  void dispatch_certified(Env& env, const MessagePtr& msg);
  bool verify_certified(Env& env, const Message& msg);
  bool check_ui(Env& env, const tc::UniqueIdentifier& ui, const Digest& hash);
  bool check_context(const tc::UniqueIdentifier& ui, ReplicaId replica, tc::Phase phase, View view,
                     std::optional<Seq> seq) const;
  void flag(Env& env, ReplicaId sender, const std::string& why);

  // Normal case.
  void on_request(Env& env, const Request& req, const MessagePtr& msg);
  void try_propose(Env& env);
  bool can_propose() const;
  void propose(Env& env, BatchPtr batch);
  void on_prepare(Env& env, const PreparePtr& p);
  void maybe_send_commit(Env& env, View view, Seq seq);
  void flush_deferred_commits(Env& env);
  void on_commit(Env& env, const Commit& c);
  void try_commit(Env& env, View view, Seq seq);
  void execute_ready(Env& env);
  void ensure_fetch(Env& env, Seq seq, const Digest& prepare_digest, std::vector<ReplicaId> hints);
  void on_fetch_request(Env& env, NodeId from, const FetchRequest& fr);
  void on_fetch_reply(Env& env, const FetchReply& fr);
  BatchPtr find_batch(const Digest& batch_digest) const;
  void remember_batch(const BatchPtr& batch, Seq seq);
  bool batch_valid(const Prepare& p) const;
  Seq contiguous_committed() const;
  void arm_suspect(Env& env);

  // Decisions.
  void schedule_decision(Env& env, Seq seq);
  void send_decisions(Env& env, Seq seq, bool suppress);
  bool has_evidence(Seq seq, ReplicaId peer) const;
  void on_decision(Env& env, const Decision& d);

  // Checkpoints and state transfer.
  void send_checkpoint(Env& env, Seq seq);
  void on_checkpoint(Env& env, const Checkpoint& cp);
  void check_stable(Env& env, Seq seq);
  void make_stable(Env& env, Seq seq, const Digest& digest, std::vector<Checkpoint> proof);
  void request_state(Env& env, Seq seq, const Digest& digest, std::vector<ReplicaId> sources);
  void on_state_request(Env& env, NodeId from, const StateRequest& sr);
  void on_state_reply(Env& env, const StateReply& sr);

  // View change.
  void start_view_change(Env& env, View target);
  void on_view_change(Env& env, const ViewChangePtr& vc);
  bool validate_view_change(Env& env, const ViewChange& vc);
  void maybe_join(Env& env);
  void maybe_build_new_view(Env& env, View target);
  std::map<Seq, Candidate> choose_proposals(const std::vector<ViewChangePtr>& proofs, Seq low) const;
  void on_new_view(Env& env, const std::shared_ptr<const NewView>& nv);
  bool validate_new_view(Env& env, const NewView& nv);
  void install_view(Env& env, const NewView& nv);

  // Trusted component access.
  std::optional<tc::UniqueIdentifier> certify(Env& env, tc::Phase phase, View view, Seq seq, const Digest& hash);

  // Plumbing.
  void broadcast(Env& env, const MessagePtr& msg, std::optional<ReplicaId> skip = std::nullopt);
  std::uint64_t arm(Env& env, TimerKey key, TimeNs delay);
  void disarm(TimerKey key) { timers_.erase(key); }
  bool timer_live(TimerKey key, std::uint64_t token) const;
  NodeId client_node(ClientId c) const { return config_.n() + c; }

  ReplicaId id_;
  ProtocolConfig config_;
  bool halted_ = false;

  View view_ = 0;
  bool in_vc_ = false;
  View vc_target_ = 0;

  std::vector<Timeline> timelines_;                         // detection mode
  std::map<View, std::map<Seq, PreparePtr>> prepare_queue_;  // prevention mode
  Seq expected_prepare_seq_ = 1;

  std::map<SlotKey, Slot> slots_;
  std::map<Seq, CommittedEntry> committed_;
  std::set<SlotKey> deferred_commits_;
  std::map<Digest, std::pair<BatchPtr, Seq>> batches_;
  std::map<Seq, FetchState> fetches_;

  // Leader bookkeeping.
  std::map<ClientId, RequestPtr> pending_;
  std::deque<std::pair<ClientId, Digest>> arrival_;
  std::set<Digest> in_flight_;
  Seq next_seq_ = 1;
  bool batch_expired_ = false;

  // Execution.
  ExecutionState state_;
  Seq suspect_mark_ = 0;

  // Decisions.
  std::map<Seq, std::set<ReplicaId>> decided_from_;
  std::vector<Seq> peer_commit_high_;

  // Checkpoints.
  std::map<Seq, std::map<ReplicaId, Checkpoint>> checkpoints_;
  std::map<Seq, Checkpoint> own_checkpoints_;
  std::map<Seq, Bytes> snapshots_;
  Seq own_cp_seq_ = 0;
  Seq stable_seq_ = 0;
  Digest stable_digest_;
  std::vector<Checkpoint> stable_proof_;
  std::optional<StateTarget> state_target_;

  // Everything this replica certified since its stable checkpoint.
  std::vector<SentEntry> sent_log_;

  // View change.
  std::map<View, std::map<ReplicaId, ViewChangePtr>> view_changes_;
  std::vector<View> highest_vc_;
  std::uint64_t vc_count_ = 0;
  std::uint64_t nv_count_ = 0;
  bool prepare_counter_used_ = false;

  std::map<TimerKey, std::uint64_t> timers_;
  std::uint64_t next_token_ = 0;
};

}  // namespace tcbft::protocol
