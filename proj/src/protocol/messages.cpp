#include "tcbft/protocol/messages.hpp"

#include <fmt/format.h>

#include "tcbft/core/encoding.hpp"

namespace tcbft::protocol {

namespace {

void put_ui(Encoder& e, const tc::UniqueIdentifier& ui) {
  e.u32(ui.tc.replica).u64(ui.tc.epoch).u64(ui.counter.name).u64(ui.value).digest(ui.msg_hash);
}

}  // namespace

Digest Request::compute_digest(ClientId client, std::uint64_t client_seq, ByteView payload) {
  Encoder e;
  e.str("request").u32(client).u64(client_seq).bytes(payload);
  return e.hash();
}

BatchPtr Batch::make(std::vector<RequestPtr> requests) {
  auto b = std::make_shared<Batch>();
  Encoder e;
  e.str("batch").u32(static_cast<std::uint32_t>(requests.size()));
  for (const auto& r : requests) e.digest(r->digest);
  b->digest = e.hash();
  b->requests = std::move(requests);
  return b;
}

Digest prepare_statement(View view, Seq seq, const Digest& batch_digest) {
  Encoder e;
  e.str("prepare").u64(view).u64(seq).digest(batch_digest);
  return e.hash();
}

Digest commit_statement(View view, Seq seq, ReplicaId replica, const Digest& prepare_digest) {
  Encoder e;
  e.str("commit").u64(view).u64(seq).u32(replica).digest(prepare_digest);
  return e.hash();
}

Digest Prepare::statement() const { return prepare_statement(view, seq, batch_digest); }

Digest Commit::statement() const { return commit_statement(view, seq, replica, prepare_digest); }

Digest Checkpoint::statement() const {
  Encoder e;
  e.str("checkpoint").u64(seq).digest(state_digest).u32(replica);
  return e.hash();
}

Digest ViewChange::statement() const {
  Encoder e;
  e.str("view-change").u64(new_view).u32(replica).u64(stable_seq).digest(stable_digest);
  e.u32(static_cast<std::uint32_t>(stable_proof.size()));
  for (const auto& c : stable_proof) put_ui(e, c.ui);
  e.u32(static_cast<std::uint32_t>(log.size()));
  for (const auto& entry : log) {
    e.u8(static_cast<std::uint8_t>(entry.kind)).u64(entry.view).u64(entry.seq);
    put_ui(e, entry.ui);
    if (entry.prepare) e.digest(entry.prepare->statement());
    if (entry.skip) e.bytes(tc::certified_payload(*entry.skip));
  }
  e.u32(static_cast<std::uint32_t>(decided.size()));
  for (const auto& d : decided) {
    e.u64(d.view).u64(d.seq).digest(d.prepare->statement());
    for (const auto& ui : d.proof) put_ui(e, ui);
  }
  e.u8(fence ? 1 : 0);
  if (fence) e.bytes(tc::certified_payload(*fence));
  e.u8(prepare_fence ? 1 : 0);
  if (prepare_fence) e.bytes(tc::certified_payload(*prepare_fence));
  return e.hash();
}

Digest NewView::statement() const {
  Encoder e;
  e.str("new-view").u64(view).u32(leader).u64(low);
  e.u32(static_cast<std::uint32_t>(proofs.size()));
  for (const auto& vc : proofs) put_ui(e, vc->ui);
  e.u32(static_cast<std::uint32_t>(proposals.size()));
  for (const auto& p : proposals) {
    e.u64(p->seq).digest(p->statement());
    put_ui(e, p->ui);
  }
  if (prepare_skip) e.bytes(tc::certified_payload(*prepare_skip));
  return e.hash();
}

std::string_view to_string(MsgKind k) {
  switch (k) {
    case MsgKind::request: return "request";
    case MsgKind::reply: return "reply";
    case MsgKind::prepare: return "prepare";
    case MsgKind::commit: return "commit";
    case MsgKind::decision: return "decision";
    case MsgKind::checkpoint: return "checkpoint";
    case MsgKind::view_change: return "view_change";
    case MsgKind::new_view: return "new_view";
    case MsgKind::fetch_request: return "fetch_request";
    case MsgKind::fetch_reply: return "fetch_reply";
    case MsgKind::state_request: return "state_request";
    case MsgKind::state_reply: return "state_reply";
  }
  return "?";
}

namespace {

std::size_t view_change_size(const ViewChange& vc, const cost::SizeModel& s, std::size_t f) {
  std::size_t total = s.header_bytes + 2 * s.hash_bytes + s.ui_bytes;
  total += vc.stable_proof.size() * s.checkpoint();
  for (const auto& entry : vc.log) {
    total += s.ui_bytes + s.hash_bytes;
    if (entry.prepare) total += s.prepare(entry.prepare->batch ? entry.prepare->batch->requests.size() : 0);
  }
  for (const auto& d : vc.decided) {
    total += s.prepare(d.prepare->batch ? d.prepare->batch->requests.size() : 0) + (f + 1) * s.ui_bytes;
  }
  if (vc.fence) total += s.ui_bytes;
  if (vc.prepare_fence) total += s.ui_bytes;
  return total;
}

}  // namespace

std::size_t modeled_size(const Message& m, const cost::SizeModel& s, std::size_t f, bool threshold_proofs) {
  switch (m.kind()) {
    case MsgKind::request: return s.request();
    case MsgKind::reply: return s.reply();
    case MsgKind::prepare: {
      const auto& p = m.as<Prepare>();
      return s.prepare(p.batch ? p.batch->requests.size() : 0);
    }
    case MsgKind::commit: return s.commit();
    case MsgKind::decision: return s.decision(f, threshold_proofs);
    case MsgKind::checkpoint: return s.checkpoint();
    case MsgKind::view_change: return view_change_size(m.as<ViewChange>(), s, f);
    case MsgKind::new_view: {
      const auto& nv = m.as<NewView>();
      std::size_t total = s.header_bytes + s.hash_bytes + s.ui_bytes;
      for (const auto& vc : nv.proofs) total += view_change_size(*vc, s, f);
      for (const auto& p : nv.proposals) total += s.prepare(p->batch->requests.size());
      return total;
    }
    case MsgKind::fetch_request: return s.header_bytes + s.hash_bytes;
    case MsgKind::fetch_reply: return s.prepare(m.as<FetchReply>().prepare->batch->requests.size());
    case MsgKind::state_request: return s.header_bytes + 8;
    case MsgKind::state_reply: return s.header_bytes + m.as<StateReply>().state.size();
  }
  return 0;
}

std::string describe(const Message& m) {
  switch (m.kind()) {
    case MsgKind::request: {
      const auto& r = m.as<Request>();
      return fmt::format("request c={} cs={}", r.client, r.client_seq);
    }
    case MsgKind::reply: {
      const auto& r = m.as<Reply>();
      return fmt::format("reply c={} cs={} s={}", r.client, r.client_seq, r.seq);
    }
    case MsgKind::prepare: {
      const auto& p = m.as<Prepare>();
      return fmt::format("prepare v={} s={} ui={} b={}", p.view, p.seq, p.ui.value, p.batch_digest.short_hex());
    }
    case MsgKind::commit: {
      const auto& c = m.as<Commit>();
      return fmt::format("commit v={} s={} ui={}", c.view, c.seq, c.ui.value);
    }
    case MsgKind::decision: {
      const auto& d = m.as<Decision>();
      return fmt::format("decision v={} s={}", d.view, d.seq);
    }
    case MsgKind::checkpoint: {
      const auto& c = m.as<Checkpoint>();
      return fmt::format("checkpoint s={} ui={}", c.seq, c.ui.value);
    }
    case MsgKind::view_change: {
      const auto& vc = m.as<ViewChange>();
      return fmt::format("view_change v={} stable={} log={} ui={}", vc.new_view, vc.stable_seq, vc.log.size(),
                         vc.ui.value);
    }
    case MsgKind::new_view: {
      const auto& nv = m.as<NewView>();
      return fmt::format("new_view v={} low={} proposals={} ui={}", nv.view, nv.low, nv.proposals.size(),
                         nv.ui.value);
    }
    case MsgKind::fetch_request: return fmt::format("fetch_request s={}", m.as<FetchRequest>().seq);
    case MsgKind::fetch_reply: return fmt::format("fetch_reply s={}", m.as<FetchReply>().prepare->seq);
    case MsgKind::state_request: return fmt::format("state_request s={}", m.as<StateRequest>().seq);
    case MsgKind::state_reply: return fmt::format("state_reply s={}", m.as<StateReply>().seq);
  }
  return "?";
}

std::optional<ReplicaId> certifier_of(const Message& m) {
  switch (m.kind()) {
    case MsgKind::prepare: return m.as<Prepare>().ui.tc.replica;
    case MsgKind::commit: return m.as<Commit>().ui.tc.replica;
    case MsgKind::checkpoint: return m.as<Checkpoint>().ui.tc.replica;
    case MsgKind::view_change: return m.as<ViewChange>().ui.tc.replica;
    case MsgKind::new_view: return m.as<NewView>().ui.tc.replica;
    default: return std::nullopt;
  }
}

std::vector<const tc::UniqueIdentifier*> certificates_of(const Message& m) {
  switch (m.kind()) {
    case MsgKind::prepare: return {&m.as<Prepare>().ui};
    case MsgKind::commit: return {&m.as<Commit>().ui};
    case MsgKind::checkpoint: return {&m.as<Checkpoint>().ui};
    case MsgKind::view_change: return {&m.as<ViewChange>().ui};
    case MsgKind::new_view: {
      const auto& nv = m.as<NewView>();
      std::vector<const tc::UniqueIdentifier*> out;
      for (const auto& p : nv.proposals) out.push_back(&p->ui);
      out.push_back(&nv.ui);
      return out;
    }
    default: return {};
  }
}

}  // namespace tcbft::protocol
