#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tcbft/clients/client.hpp"
#include "tcbft/core/encoding.hpp"
#include "tcbft/protocol/replica.hpp"
#include "tcbft/sim/config.hpp"
#include "tcbft/sim/tc_bank.hpp"
#include "tcbft/tc/admin.hpp"

namespace tcbft::sim {

using protocol::MessagePtr;
using protocol::NodeId;

class World;

/// Scripted Byzantine behaviour. Faulty replicas run the ordinary replica
/// code; the script sits between them and the network and may also use
/// their trusted components directly.
class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual std::unique_ptr<Adversary> clone() const = 0;

  /// Replicas the script controls. Oracles only judge the others.
  virtual std::set<ReplicaId> faulty() const { return {}; }
  virtual void start(World&) {}
  /// Whether `msg`, sent by replica `from`, goes out to `to`.
  virtual bool filter(World&, ReplicaId, NodeId, const MessagePtr&) { return true; }
  /// Script state that influences future behaviour, for state pruning.
  virtual void fingerprint(Encoder&) const {}
};

std::unique_ptr<Adversary> make_adversary(const SimConfig& config);

enum class ControlKind : std::uint8_t { crash, snapshot_crash, restore, restart };

std::string_view to_string(ControlKind k);

struct EventKey {
  TimeNs time = 0;
  std::uint64_t id = 0;

  auto operator<=>(const EventKey&) const = default;
};

struct Event {
  enum class Kind : std::uint8_t { start, deliver, timer, control };

  Kind kind = Kind::deliver;
  NodeId to = 0;
  NodeId from = 0;
  MessagePtr msg;
  protocol::TimerKey key;
  std::uint64_t token = 0;
  ControlKind control = ControlKind::crash;
};

struct Tally {
  std::array<std::uint64_t, protocol::kMsgKinds> msgs{};
  std::array<std::uint64_t, protocol::kMsgKinds> bytes{};
  std::uint64_t replica_link_bytes = 0;  // replica to replica
  std::uint64_t client_link_bytes = 0;   // client to replica and back
  std::uint64_t dropped = 0;             // copies lost and resent by the link
  std::uint64_t withheld = 0;            // suppressed by the adversary
  std::vector<std::uint64_t> node_msgs;  // sent, per node
  std::vector<std::uint64_t> node_bytes;

  std::uint64_t msgs_total() const;
  std::uint64_t bytes_total() const;
  std::uint64_t of(protocol::MsgKind k) const { return msgs[static_cast<std::size_t>(k)]; }
  std::uint64_t bytes_of(protocol::MsgKind k) const { return bytes[static_cast<std::size_t>(k)]; }
};

/// A line of the human-readable account of a run.
struct Highlight {
  TimeNs time = 0;
  std::string text;
};

struct ClientVerdict {
  ClientId client = 0;
  bool stalled = false;
  std::uint64_t completed = 0;
  std::uint64_t stalled_seq = 0;  // request that stalled
};

struct ReplicaSummary {
  ReplicaId id = 0;
  bool faulty = false;
  bool crashed = false;
  bool halted = false;
  View view = 0;
  bool in_view_change = false;
  Seq executed = 0;
  Seq stable = 0;
  std::vector<std::uint64_t> cursors;  // admission cursor per sender
  std::vector<bool> flagged;
  std::uint64_t tc_accesses = 0;
  std::uint64_t certificates = 0;
};

struct Verdicts {
  std::vector<std::string> safety;       // empty means ok
  std::vector<std::string> liveness;     // requests no correct replica executed in time
  std::vector<Seq> unterminated;         // committed somewhere, not executed everywhere live
  std::vector<ClientVerdict> clients;

  bool safety_ok() const { return safety.empty(); }
  bool liveness_ok() const { return liveness.empty(); }
  bool termination_ok() const { return unterminated.empty(); }
  bool responsive() const;
};

class World {
 public:
  explicit World(SimConfig config);
  World(const World& other);
  World& operator=(const World& other);
  World(World&&) noexcept = default;
  World& operator=(World&&) noexcept = default;
  ~World();

  /// Process events until the queue empties or the next event lies beyond
  /// the configured duration.
  void run();
  /// Process the earliest event; false when there is none within duration.
  bool step();

  // State exploration.
  std::vector<EventKey> pending_deliveries() const;
  std::optional<EventKey> next_timer() const;
  bool has_event(EventKey key) const { return queue_.count(key) != 0; }
  void process(EventKey key);
  Digest fingerprint() const;

  // Services for adversary scripts.
  void inject(ReplicaId from, NodeId to, MessagePtr msg);
  void schedule_control(TimeNs at, ControlKind kind, ReplicaId target);
  void record(std::string text);
  tc::TrustedComponent& tc_of(ReplicaId r) { return bank_.at(r); }

  // Inspection.
  const SimConfig& config() const { return config_; }
  TimeNs now() const { return now_; }
  const protocol::Replica& replica(ReplicaId r) const { return replicas_.at(r); }
  const clients::Client& client(ClientId c) const { return clients_.at(c); }
  const TcBank& bank() const { return bank_; }
  const tc::TcDirectory& directory() const { return admin_.directory(); }
  const Tally& tally() const { return tally_; }
  const std::vector<std::string>& trace() const { return trace_; }
  const std::vector<Highlight>& highlights() const { return highlights_; }
  const std::vector<std::string>& violations() const { return violations_; }
  bool is_faulty(ReplicaId r) const { return faulty_.count(r) != 0; }
  bool is_crashed(ReplicaId r) const { return crashed_.at(r); }
  std::size_t queue_size() const { return queue_.size(); }

  std::vector<ReplicaSummary> replica_summaries() const;
  /// Oracle verdicts judged at time `end`; also runs the certificate scan.
  Verdicts verdicts(TimeNs end) const;
  /// Verdicts at the end of the configured duration.
  Verdicts verdicts() const { return verdicts(std::max(now_, config_.duration)); }

 private:
  class NodeEnv;
  friend class NodeEnv;

  void schedule(TimeNs at, Event ev);
  void handle(const Event& ev);
  void send(NodeId from, NodeId to, MessagePtr msg);
  void transmit(NodeId from, NodeId to, MessagePtr msg);
  TimeNs sample_delay(NodeId from, NodeId to);
  void apply_control(const Event& ev);
  void resume(ReplicaId r);
  void on_note(ReplicaId r, const protocol::Note& note);
  void violation(std::string text);
  void emit(nlohmann::json line);
  bool correct(ReplicaId r) const { return faulty_.count(r) == 0; }
  std::vector<std::string> certificate_scan() const;

  SimConfig config_;
  protocol::ProtocolConfig protocol_;
  std::mt19937_64 rng_;
  TimeNs now_ = 0;
  std::uint64_t next_event_id_ = 0;
  std::map<EventKey, Event> queue_;

  tc::AdminConsole admin_;
  TcBank bank_;
  std::vector<protocol::Replica> replicas_;
  std::vector<clients::Client> clients_;
  std::unique_ptr<Adversary> adversary_;
  std::set<ReplicaId> faulty_;

  std::vector<bool> crashed_;
  std::vector<std::vector<Event>> deferred_;
  std::map<ReplicaId, tc::SnapshotBlob> snapshots_;
  std::vector<std::uint64_t> epochs_;

  // Oracle state.
  std::map<Seq, std::map<ReplicaId, Digest>> committed_;
  std::map<Seq, TimeNs> first_commit_;
  std::map<std::pair<View, Seq>, std::map<ReplicaId, Digest>> prepared_;
  std::map<Seq, Digest> chain_;
  std::vector<Seq> last_executed_;
  std::map<std::tuple<ReplicaId, std::uint64_t, std::uint64_t>, Digest> admitted_;
  std::map<std::pair<ClientId, std::uint64_t>, Digest> replies_;
  std::vector<std::string> violations_;
  bool check_prepared_ = false;

  Tally tally_;
  std::vector<std::string> trace_;
  std::vector<Highlight> highlights_;
  std::set<std::pair<ReplicaId, ReplicaId>> gap_reported_;
  std::set<ReplicaId> diverged_;  // execution divergence is reported once
};

/// Everything a finished run produces.
struct Trace {
  SimConfig config;
  Tally tally;
  Verdicts verdicts;
  std::vector<ReplicaSummary> replicas;
  std::vector<clients::LatencyRecord> latencies;
  std::vector<std::string> events;  // JSON lines
  std::vector<Highlight> highlights;
  std::uint64_t ops_completed = 0;  // requests whose client saw enough replies
  Seq batches_committed = 0;
  TimeNs end = 0;
};

Trace run(const SimConfig& config);

}  // namespace tcbft::sim
