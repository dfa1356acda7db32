#pragma once

#include <map>
#include <optional>

#include "tcbft/core/encoding.hpp"
#include "tcbft/protocol/messages.hpp"

namespace tcbft::protocol {

/// Deterministic key-value store. A request payload starts with an 8-byte
/// key; the rest is the value written. The result is a digest of the key
/// and the value it replaced.
class KvService {
 public:
  Digest apply(const Request& request);
  Digest digest() const;
  std::size_t size() const { return entries_.size(); }

  void encode(Encoder& e) const;
  static KvService decode(Decoder& d);

  bool operator==(const KvService&) const = default;

 private:
  std::map<std::uint64_t, Digest> entries_;
};

/// Last executed request per client, for at-most-once execution.
struct ReplyRecord {
  std::uint64_t client_seq = 0;
  Seq seq = 0;
  View view = 0;
  Digest result;

  bool operator==(const ReplyRecord&) const = default;
};

/// Everything state transfer moves: service, reply cache and the
/// execution chain digest.
struct ExecutionState {
  Seq executed = 0;
  Digest chain;
  KvService service;
  std::map<ClientId, ReplyRecord> replies;

  Digest digest() const;
  Bytes encode() const;
  static std::optional<ExecutionState> decode(ByteView bytes);

  /// Apply a committed batch at seq = executed + 1. Returns one reply
  /// record per request that had not run before.
  std::vector<std::pair<ClientId, ReplyRecord>> execute(Seq seq, View view, const Batch& batch);
};

/// Client authentication. A keyed MAC stands in for the client signature;
/// its modeled size is the signature size.
namespace client_auth {
crypto::MacKey key_for(const Digest& seed, ClientId client);
Bytes sign(const Digest& seed, const Request& request);
bool verify(const Digest& seed, const Request& request);
}  // namespace client_auth

}  // namespace tcbft::protocol
