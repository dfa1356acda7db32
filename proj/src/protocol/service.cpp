#include "tcbft/protocol/service.hpp"

#include "tcbft/core/encoding.hpp"

namespace tcbft::protocol {

Digest KvService::apply(const Request& request) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < 8 && i < request.payload.size(); ++i) {
    key |= std::uint64_t{request.payload[i]} << (8 * i);
  }
  ByteView value(request.payload);
  value = value.size() > 8 ? value.subspan(8) : ByteView{};
  Digest& slot = entries_[key];
  Encoder result;
  result.str("kv-result").u64(key).digest(slot);
  slot = crypto::sha256(value);
  return result.hash();
}

Digest KvService::digest() const {
  Encoder e;
  encode(e);
  return e.hash();
}

void KvService::encode(Encoder& e) const {
  e.u64(entries_.size());
  for (const auto& [key, value] : entries_) e.u64(key).digest(value);
}

KvService KvService::decode(Decoder& d) {
  KvService s;
  std::uint64_t count = d.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t key = d.u64();
    s.entries_[key] = d.digest();
  }
  return s;
}

Digest ExecutionState::digest() const {
  Encoder e;
  e.str("execution-state");
  e.bytes(encode());
  return e.hash();
}

Bytes ExecutionState::encode() const {
  Encoder e;
  e.u64(executed).digest(chain);
  service.encode(e);
  e.u32(static_cast<std::uint32_t>(replies.size()));
  for (const auto& [client, r] : replies) e.u32(client).u64(r.client_seq).u64(r.seq).u64(r.view).digest(r.result);
  return e.take();
}

std::optional<ExecutionState> ExecutionState::decode(ByteView bytes) {
  try {
    Decoder d(bytes);
    ExecutionState s;
    s.executed = d.u64();
    s.chain = d.digest();
    s.service = KvService::decode(d);
    std::uint32_t count = d.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      ClientId client = d.u32();
      ReplyRecord r;
      r.client_seq = d.u64();
      r.seq = d.u64();
      r.view = d.u64();
      r.result = d.digest();
      s.replies[client] = r;
    }
    if (!d.done()) return std::nullopt;
    return s;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::vector<std::pair<ClientId, ReplyRecord>> ExecutionState::execute(Seq seq, View view, const Batch& batch) {
  std::vector<std::pair<ClientId, ReplyRecord>> out;
  for (const auto& request : batch.requests) {
    auto it = replies.find(request->client);
    if (it != replies.end() && it->second.client_seq >= request->client_seq) continue;
    ReplyRecord r{request->client_seq, seq, view, service.apply(*request)};
    replies[request->client] = r;
    out.emplace_back(request->client, r);
  }
  Encoder e;
  e.str("chain").digest(chain).u64(seq).digest(batch.digest);
  chain = e.hash();
  executed = seq;
  return out;
}

namespace client_auth {

crypto::MacKey key_for(const Digest& seed, ClientId client) {
  Encoder e;
  e.digest(seed).u32(client);
  Digest d = crypto::derive("client-key", e.data());
  crypto::MacKey key{};
  std::copy(d.bytes.begin(), d.bytes.end(), key.begin());
  return key;
}

Bytes sign(const Digest& seed, const Request& request) {
  auto mac = crypto::hmac_sha256(key_for(seed, request.client), request.digest.bytes);
  return Bytes(mac.begin(), mac.end());
}

bool verify(const Digest& seed, const Request& request) {
  if (request.digest != Request::compute_digest(request.client, request.client_seq, request.payload)) return false;
  return crypto::hmac_verify(key_for(seed, request.client), request.digest.bytes, request.signature);
}

}  // namespace client_auth

}  // namespace tcbft::protocol
