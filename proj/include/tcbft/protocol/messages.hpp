#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "tcbft/cost/size_model.hpp"
#include "tcbft/tc/identity.hpp"

namespace tcbft::protocol {

/// Network endpoint. Replicas occupy [0, n), clients follow.
using NodeId = std::uint32_t;

struct Request {
  ClientId client = 0;
  std::uint64_t client_seq = 0;
  Bytes payload;
  Bytes signature;  // client signature over `digest`
  Digest digest;

  static Digest compute_digest(ClientId client, std::uint64_t client_seq, ByteView payload);
};
using RequestPtr = std::shared_ptr<const Request>;

struct Batch {
  std::vector<RequestPtr> requests;
  Digest digest;

  bool empty() const { return requests.empty(); }
  static std::shared_ptr<const Batch> make(std::vector<RequestPtr> requests);
};
using BatchPtr = std::shared_ptr<const Batch>;

/// Leader proposal. `batch` may be absent when only the certified header is
/// known, e.g. when the Prepare was learned from a decision proof.
struct Prepare {
  View view = 0;
  Seq seq = 0;
  ReplicaId leader = 0;
  Digest batch_digest;
  BatchPtr batch;
  tc::UniqueIdentifier ui;

  Digest statement() const;
};
using PreparePtr = std::shared_ptr<const Prepare>;

struct Commit {
  View view = 0;
  Seq seq = 0;
  ReplicaId replica = 0;
  Digest prepare_digest;
  tc::UniqueIdentifier ui;

  Digest statement() const;
};

struct Decision {
  View view = 0;
  Seq seq = 0;
  Digest batch_digest;
  ReplicaId sender = 0;
  std::vector<tc::UniqueIdentifier> proof;
};

struct Reply {
  ClientId client = 0;
  std::uint64_t client_seq = 0;
  ReplicaId replica = 0;
  View view = 0;
  Seq seq = 0;
  Digest result;
};

struct Checkpoint {
  Seq seq = 0;
  Digest state_digest;
  ReplicaId replica = 0;
  tc::UniqueIdentifier ui;

  Digest statement() const;
};

/// One certified message a replica sent, as reported in its view change.
struct SentEntry {
  enum class Kind : std::uint8_t { prepare, commit, checkpoint, stub, skip };

  Kind kind = Kind::stub;
  tc::UniqueIdentifier ui;
  View view = 0;
  Seq seq = 0;
  PreparePtr prepare;            // prepare entries, and the Prepare a commit endorsed
  Digest digest;                 // checkpoint state digest
  std::optional<tc::SkipAttestation> skip;  // prevention-mode voided positions
};

/// A sequence number the sender committed, with the proof it holds.
struct DecidedEntry {
  View view = 0;
  Seq seq = 0;
  PreparePtr prepare;
  std::vector<tc::UniqueIdentifier> proof;
};

struct ViewChange {
  View new_view = 0;
  ReplicaId replica = 0;
  Seq stable_seq = 0;
  Digest stable_digest;
  std::vector<Checkpoint> stable_proof;
  std::vector<SentEntry> log;
  std::vector<DecidedEntry> decided;
  std::optional<tc::SkipAttestation> fence;          // prevention: commit counter moved to new_view
  std::optional<tc::SkipAttestation> prepare_fence;  // prevention: same for the prepare counter
  tc::UniqueIdentifier ui;

  Digest statement() const;
};
using ViewChangePtr = std::shared_ptr<const ViewChange>;

struct NewView {
  View view = 0;
  ReplicaId leader = 0;
  Seq low = 0;
  std::vector<ViewChangePtr> proofs;
  std::vector<PreparePtr> proposals;
  std::optional<tc::SkipAttestation> prepare_skip;
  tc::UniqueIdentifier ui;

  Digest statement() const;
};

/// Ask a peer for the full Prepare behind a known prepare digest.
struct FetchRequest {
  Seq seq = 0;
  Digest prepare_digest;
  ReplicaId replica = 0;
};

struct FetchReply {
  PreparePtr prepare;  // always carries its batch
  ReplicaId replica = 0;
};

struct StateRequest {
  Seq seq = 0;
  ReplicaId replica = 0;
};

struct StateReply {
  Seq seq = 0;
  ReplicaId replica = 0;
  Bytes state;
};

enum class MsgKind : std::uint8_t {
  request,
  reply,
  prepare,
  commit,
  decision,
  checkpoint,
  view_change,
  new_view,
  fetch_request,
  fetch_reply,
  state_request,
  state_reply,
};
constexpr std::size_t kMsgKinds = 12;

std::string_view to_string(MsgKind k);

struct Message {
  NodeId from = 0;
  std::variant<Request, Reply, Prepare, Commit, Decision, Checkpoint, ViewChange, NewView, FetchRequest,
               FetchReply, StateRequest, StateReply>
      body;

  MsgKind kind() const { return static_cast<MsgKind>(body.index()); }
  template <typename T>
  const T& as() const {
    return std::get<T>(body);
  }
};
using MessagePtr = std::shared_ptr<const Message>;

template <typename T>
MessagePtr make_message(NodeId from, T body) {
  return std::make_shared<const Message>(Message{from, std::move(body)});
}

/// Statement certified by the leader for a Prepare at (view, seq).
Digest prepare_statement(View view, Seq seq, const Digest& batch_digest);
/// Statement certified by `replica` when endorsing a Prepare.
Digest commit_statement(View view, Seq seq, ReplicaId replica, const Digest& prepare_digest);

/// Replica whose trusted component certified `m`, for certified kinds.
std::optional<ReplicaId> certifier_of(const Message& m);
/// Every UI a certified message carries, in counter order.
std::vector<const tc::UniqueIdentifier*> certificates_of(const Message& m);

/// Modeled wire size.
std::size_t modeled_size(const Message& m, const cost::SizeModel& sizes, std::size_t f, bool threshold_proofs);

/// Short human-readable description used in traces.
std::string describe(const Message& m);

}  // namespace tcbft::protocol
