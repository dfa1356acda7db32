#include "tcbft/clients/client.hpp"

#include "tcbft/protocol/service.hpp"

namespace tcbft::clients {

std::string_view to_string(ReplyPolicy p) {
  return p == ReplyPolicy::weak ? "f+1" : "n-f";
}

Bytes Client::make_payload(ClientId client, std::uint64_t client_seq, std::size_t size) {
  Bytes payload(std::max<std::size_t>(size, 8), 0);
  const std::uint64_t key = (std::uint64_t{client} * 131 + client_seq) % 1024;
  for (std::size_t i = 0; i < 8; ++i) payload[i] = static_cast<std::uint8_t>(key >> (8 * i));
  for (std::size_t i = 8; i < payload.size(); ++i) {
    payload[i] = static_cast<std::uint8_t>((client_seq * 31 + i + client) & 0xff);
  }
  return payload;
}

std::optional<TimeNs> Client::in_flight_since() const {
  if (!current_) return std::nullopt;
  return current_->submit;
}

void Client::start(Env& env) {
  if (!current_ && !finished()) submit(env);
}

void Client::submit(Env& env) {
  protocol::Request req;
  req.client = config_.id;
  req.client_seq = next_seq_++;
  req.payload = make_payload(config_.id, req.client_seq, config_.tx_size);
  req.digest = protocol::Request::compute_digest(req.client, req.client_seq, req.payload);
  req.signature = protocol::client_auth::sign(config_.key_seed, req);
  Outstanding out;
  out.client_seq = req.client_seq;
  out.submit = env.now();
  out.request = protocol::make_message(config_.n() + config_.id, std::move(req));
  current_ = std::move(out);
  send_all(env);
}

void Client::send_all(Env& env) {
  for (ReplicaId r = 0; r < config_.n(); ++r) env.send(r, current_->request);
  env.arm_timer({protocol::TimerKind::retransmit, current_->client_seq}, config_.retransmit_timeout, ++timer_token_);
}

void Client::on_message(Env& env, const MessagePtr& msg) {
  if (msg->kind() != protocol::MsgKind::reply || !current_) return;
  const auto& reply = msg->as<protocol::Reply>();
  if (msg->from >= config_.n() || reply.replica != msg->from) return;
  if (reply.client != config_.id || reply.client_seq != current_->client_seq) return;
  current_->replies[reply.replica] = reply;

  std::size_t matching = 0;
  for (const auto& [r, other] : current_->replies) {
    bool same = other.result == reply.result;
    if (config_.policy == ReplyPolicy::n_minus_f) same = same && other.seq == reply.seq;
    if (same) ++matching;
  }
  if (matching < config_.threshold()) return;

  latencies_.push_back({config_.id, current_->client_seq, current_->submit, env.now()});
  accepted_[current_->client_seq] = reply.result;
  ++completed_;
  current_.reset();
  if (!finished()) submit(env);
}

void Client::on_timer(Env& env, protocol::TimerKey key, std::uint64_t token) {
  if (token != timer_token_ || !current_ || key.a != current_->client_seq) return;
  ++retransmissions_;
  send_all(env);
}

}  // namespace tcbft::clients
