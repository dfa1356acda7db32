#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "tcbft/clients/client.hpp"
#include "tcbft/cost/size_model.hpp"
#include "tcbft/protocol/config.hpp"
#include "tcbft/tc/identity.hpp"

namespace tcbft::sim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Messages between the groups are held back until the partition heals.
struct Partition {
  TimeNs start = 0;
  TimeNs end = 0;
  std::vector<std::vector<ReplicaId>> groups;
};

struct ScriptSpec {
  std::string name = "none";
  nlohmann::json params = nlohmann::json::object();
};

struct SimConfig {
  std::uint32_t f = 1;
  std::uint32_t batch_size = 1;
  std::size_t tx_size = 256;
  std::uint32_t clients = 1;
  std::uint64_t requests_per_client = 0;  // 0 keeps clients busy until the end
  TimeNs duration = 3000 * kMillisecond;
  std::uint64_t seed = 42;

  protocol::Mode mode = protocol::Mode::detection;
  bool decisions = true;
  TimeNs delta = 6 * kMillisecond;
  bool pipelining = true;
  std::uint32_t pipeline_depth = 8;
  std::uint64_t checkpoint_interval = 100;
  TimeNs batch_timeout = 6 * kMillisecond;
  TimeNs suspect_timeout = 100 * kMillisecond;
  TimeNs view_change_timeout = 100 * kMillisecond;
  TimeNs fetch_timeout = 20 * kMillisecond;
  TimeNs retransmit_timeout = 500 * kMillisecond;
  clients::ReplyPolicy reply_policy = clients::ReplyPolicy::weak;

  tc::CertMode tc_mode = tc::CertMode::sig;
  bool vulnerable_tc = false;
  protocol::CounterAcceptance counter_acceptance = protocol::CounterAcceptance::pinned;
  std::uint64_t tc_window = 0;

  TimeNs delay_min = 1 * kMillisecond;
  TimeNs delay_max = 5 * kMillisecond;
  double drop_rate = 0;  // chance a copy is lost; the link resends it
  std::vector<Partition> partitions;

  bool threshold_proofs = false;
  cost::SizeModel sizes;
  ScriptSpec script;
  bool trace = true;

  std::uint32_t n() const { return 2 * f + 1; }
  TimeNs mean_rtt() const { return delay_min + delay_max; }
  /// A request outstanding this long counts as stalled.
  TimeNs stall_window() const { return 100 * mean_rtt(); }

  protocol::ProtocolConfig protocol() const;
  clients::ClientConfig client(ClientId id) const;
  Digest system_seed() const;

  /// Throws ConfigError naming the first inconsistency.
  void validate() const;
};

SimConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SimConfig& c);

/// Apply `path=value` where path is dotted ("sim.delta_ms", "script.params.k")
/// and value is JSON, or a bare string when it does not parse as JSON.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace tcbft::sim
