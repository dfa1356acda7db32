#pragma once

#include <map>
#include <optional>
#include <string_view>

#include "tcbft/protocol/env.hpp"

namespace tcbft::clients {

using protocol::Env;
using protocol::MessagePtr;
using protocol::NodeId;

/// weak: f+1 replies with the same result.
/// n_minus_f: n-f replies agreeing on both result and sequence number.
enum class ReplyPolicy : std::uint8_t { weak, n_minus_f };

std::string_view to_string(ReplyPolicy p);

struct ClientConfig {
  ClientId id = 0;
  std::uint32_t f = 1;
  std::size_t tx_size = 256;
  std::uint64_t requests = 0;  // 0 keeps submitting until the run ends
  TimeNs retransmit_timeout = 500 * kMillisecond;
  ReplyPolicy policy = ReplyPolicy::weak;
  Digest key_seed;

  std::uint32_t n() const { return 2 * f + 1; }
  std::uint32_t threshold() const { return policy == ReplyPolicy::weak ? f + 1 : n() - f; }
};

struct LatencyRecord {
  ClientId client = 0;
  std::uint64_t client_seq = 0;
  TimeNs submit = 0;
  TimeNs complete = 0;
};

/// Closed-loop client: one request in flight, sent to every replica,
/// completed once the reply policy is met.
class Client {
 public:
  explicit Client(ClientConfig config) : config_(std::move(config)) {}

  void start(Env& env);
  void on_message(Env& env, const MessagePtr& msg);
  void on_timer(Env& env, protocol::TimerKey key, std::uint64_t token);

  const ClientConfig& config() const { return config_; }
  ClientId id() const { return config_.id; }
  std::uint64_t completed() const { return completed_; }
  bool finished() const { return config_.requests != 0 && completed_ >= config_.requests; }
  /// Submission time of the request still waiting for its replies.
  std::optional<TimeNs> in_flight_since() const;
  std::uint64_t in_flight_seq() const { return current_ ? current_->client_seq : 0; }
  const std::vector<LatencyRecord>& latencies() const { return latencies_; }
  /// Result digests the client accepted, by client sequence number.
  const std::map<std::uint64_t, Digest>& accepted() const { return accepted_; }
  std::uint64_t retransmissions() const { return retransmissions_; }

  /// Payload for request number `client_seq`: an 8-byte key then filler.
  static Bytes make_payload(ClientId client, std::uint64_t client_seq, std::size_t size);

 private:
  struct Outstanding {
    std::uint64_t client_seq = 0;
    TimeNs submit = 0;
    MessagePtr request;
    std::map<ReplicaId, protocol::Reply> replies;
  };

  void submit(Env& env);
  void send_all(Env& env);

  ClientConfig config_;
  std::uint64_t next_seq_ = 1;
  std::optional<Outstanding> current_;
  std::uint64_t completed_ = 0;
  std::uint64_t retransmissions_ = 0;
  std::uint64_t timer_token_ = 0;
  std::vector<LatencyRecord> latencies_;
  std::map<std::uint64_t, Digest> accepted_;
};

}  // namespace tcbft::clients
