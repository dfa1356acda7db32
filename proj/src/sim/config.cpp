#include "tcbft/sim/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

#include "tcbft/core/crypto.hpp"
#include "tcbft/core/encoding.hpp"

namespace tcbft::sim {

namespace {

using nlohmann::json;

const std::set<std::string> kScripts{"none",           "equivocate_withhold", "counter_identity",
                                     "silent_repliers", "crash_tcs",           "gap_forever"};

// Time fields are written as "<name>_ms"; the bare name is accepted too.
const std::vector<std::pair<std::string, TimeNs SimConfig::*>> kTimes{
    {"duration", &SimConfig::duration},
    {"delta", &SimConfig::delta},
    {"batch_timeout", &SimConfig::batch_timeout},
    {"suspect_timeout", &SimConfig::suspect_timeout},
    {"view_change_timeout", &SimConfig::view_change_timeout},
    {"fetch_timeout", &SimConfig::fetch_timeout},
    {"retransmit_timeout", &SimConfig::retransmit_timeout},
    {"delay_min", &SimConfig::delay_min},
    {"delay_max", &SimConfig::delay_max},
};

TimeNs ms_to_ns(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(fmt::format("{} must be a number of milliseconds", key));
  const double ms = v.get<double>();
  if (ms < 0 || !std::isfinite(ms)) throw ConfigError(fmt::format("{} must be non-negative", key));
  return static_cast<TimeNs>(std::llround(ms * static_cast<double>(kMillisecond)));
}

double ns_to_ms(TimeNs t) { return static_cast<double>(t) / static_cast<double>(kMillisecond); }

template <typename T>
T get_number(const json& v, const std::string& key) {
  if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0)) {
    throw ConfigError(fmt::format("{} must be a non-negative integer", key));
  }
  return v.get<T>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(fmt::format("{} must be true or false", key));
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(fmt::format("{} must be a string", key));
  return v.get<std::string>();
}

cost::SizeModel sizes_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sizes must be an object");
  cost::SizeModel s;
  for (const auto& [key, v] : j.items()) {
    const std::string k = "sizes." + key;
    if (key == "header_bytes") {
      s.header_bytes = get_number<std::size_t>(v, k);
    } else if (key == "hash_bytes") {
      s.hash_bytes = get_number<std::size_t>(v, k);
    } else if (key == "sig_bytes") {
      s.sig_bytes = get_number<std::size_t>(v, k);
    } else if (key == "ui_bytes") {
      s.ui_bytes = get_number<std::size_t>(v, k);
    } else if (key == "tx_bytes") {
      s.tx_bytes = get_number<std::size_t>(v, k);
    } else if (key == "threshold_proof_bytes") {
      s.threshold_proof_bytes = get_number<std::size_t>(v, k);
    } else {
      throw ConfigError(fmt::format("unknown field {}", k));
    }
  }
  return s;
}

Partition partition_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("partitions entries must be objects");
  Partition p;
  for (const auto& [key, v] : j.items()) {
    if (key == "start_ms") {
      p.start = ms_to_ns(v, "partitions.start_ms");
    } else if (key == "end_ms") {
      p.end = ms_to_ns(v, "partitions.end_ms");
    } else if (key == "groups") {
      p.groups = v.get<std::vector<std::vector<ReplicaId>>>();
    } else {
      throw ConfigError(fmt::format("unknown field partitions.{}", key));
    }
  }
  return p;
}

}  // namespace

protocol::ProtocolConfig SimConfig::protocol() const {
  protocol::ProtocolConfig p;
  p.f = f;
  p.batch_size = batch_size;
  p.mode = mode;
  p.decisions = decisions;
  p.decision_delay = delta;
  p.pipelining = pipelining;
  p.pipeline_depth = pipeline_depth;
  p.checkpoint_interval = checkpoint_interval;
  p.batch_timeout = batch_timeout;
  p.suspect_timeout = suspect_timeout;
  p.view_change_timeout = view_change_timeout;
  p.fetch_timeout = fetch_timeout;
  p.counter_acceptance = counter_acceptance;
  p.tc_window = tc_window;
  p.client_key_seed = crypto::derive("client-keys", system_seed().bytes);
  return p;
}

clients::ClientConfig SimConfig::client(ClientId id) const {
  clients::ClientConfig c;
  c.id = id;
  c.f = f;
  c.tx_size = tx_size;
  c.requests = requests_per_client;
  c.retransmit_timeout = retransmit_timeout;
  c.policy = reply_policy;
  c.key_seed = crypto::derive("client-keys", system_seed().bytes);
  return c;
}

Digest SimConfig::system_seed() const {
  Encoder e;
  e.str("tcbft-system").u64(seed);
  return e.hash();
}

void SimConfig::validate() const {
  if (f < 1) throw ConfigError("f must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (clients < 1) throw ConfigError("clients must be at least 1");
  if (tx_size < 8) throw ConfigError("tx_size must be at least 8 bytes");
  if (pipeline_depth < 1) throw ConfigError("pipeline_depth must be at least 1");
  if (delay_max < delay_min) throw ConfigError("delay_max must not be below delay_min");
  if (delay_min <= 0) throw ConfigError("delay_min must be positive");
  if (drop_rate < 0 || drop_rate >= 1) throw ConfigError("drop_rate must be in [0, 1)");
  if (duration <= 0) throw ConfigError("duration must be positive");
  if (!sizes.valid()) throw ConfigError("every size must be positive");
  if (!kScripts.count(script.name)) throw ConfigError(fmt::format("unknown script '{}'", script.name));
  if (vulnerable_tc && script.name != "counter_identity") {
    throw ConfigError("vulnerable_tc is only allowed with the counter_identity script");
  }
  if (script.name == "counter_identity" && mode != protocol::Mode::detection) {
    throw ConfigError("counter_identity needs detection mode");
  }
  if (script.name == "equivocate_withhold" || script.name == "gap_forever") {
    if (script.params.contains("x_value") && script.params["x_value"].get<std::int64_t>() < 1) {
      throw ConfigError("x_value must be at least 1");
    }
  }
  for (const auto& p : partitions) {
    if (p.end < p.start) throw ConfigError("partition ends before it starts");
    for (const auto& g : p.groups) {
      for (ReplicaId r : g) {
        if (r >= n()) throw ConfigError(fmt::format("partition names replica {} but n = {}", r, n()));
      }
    }
  }
}

SimConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  SimConfig c;
  for (const auto& [key, v] : j.items()) {
    bool timed = false;
    for (const auto& [name, field] : kTimes) {
      if (key == name || key == name + "_ms") {
        c.*field = ms_to_ns(v, key);
        timed = true;
      }
    }
    if (timed) continue;
    if (key == "f") {
      c.f = get_number<std::uint32_t>(v, key);
    } else if (key == "n") {
      // Derived; accepted only when consistent, checked below.
    } else if (key == "batch_size" || key == "B") {
      c.batch_size = get_number<std::uint32_t>(v, key);
    } else if (key == "tx_size") {
      c.tx_size = get_number<std::size_t>(v, key);
    } else if (key == "clients") {
      c.clients = get_number<std::uint32_t>(v, key);
    } else if (key == "requests_per_client") {
      c.requests_per_client = get_number<std::uint64_t>(v, key);
    } else if (key == "seed") {
      c.seed = get_number<std::uint64_t>(v, key);
    } else if (key == "mode") {
      const std::string m = get_string(v, key);
      if (m == "detection") {
        c.mode = protocol::Mode::detection;
      } else if (m == "prevention") {
        c.mode = protocol::Mode::prevention;
      } else {
        throw ConfigError(fmt::format("mode must be detection or prevention, not '{}'", m));
      }
    } else if (key == "decisions") {
      c.decisions = get_bool(v, key);
    } else if (key == "pipelining") {
      c.pipelining = get_bool(v, key);
    } else if (key == "pipeline_depth") {
      c.pipeline_depth = get_number<std::uint32_t>(v, key);
    } else if (key == "checkpoint_interval") {
      c.checkpoint_interval = get_number<std::uint64_t>(v, key);
    } else if (key == "reply_policy") {
      const std::string p = get_string(v, key);
      if (p == "f+1") {
        c.reply_policy = clients::ReplyPolicy::weak;
      } else if (p == "n-f") {
        c.reply_policy = clients::ReplyPolicy::n_minus_f;
      } else {
        throw ConfigError(fmt::format("reply_policy must be f+1 or n-f, not '{}'", p));
      }
    } else if (key == "tc_mode") {
      const std::string m = get_string(v, key);
      if (m == "sig") {
        c.tc_mode = tc::CertMode::sig;
      } else if (m == "hmac") {
        c.tc_mode = tc::CertMode::hmac;
      } else {
        throw ConfigError(fmt::format("tc_mode must be sig or hmac, not '{}'", m));
      }
    } else if (key == "vulnerable_tc") {
      c.vulnerable_tc = get_bool(v, key);
    } else if (key == "counter_acceptance") {
      const std::string a = get_string(v, key);
      if (a == "pinned") {
        c.counter_acceptance = protocol::CounterAcceptance::pinned;
      } else if (a == "announced") {
        c.counter_acceptance = protocol::CounterAcceptance::announced;
      } else {
        throw ConfigError(fmt::format("counter_acceptance must be pinned or announced, not '{}'", a));
      }
    } else if (key == "tc_window") {
      c.tc_window = get_number<std::uint64_t>(v, key);
    } else if (key == "drop_rate") {
      if (!v.is_number()) throw ConfigError("drop_rate must be a number");
      c.drop_rate = v.get<double>();
    } else if (key == "partitions") {
      if (!v.is_array()) throw ConfigError("partitions must be an array");
      for (const auto& p : v) c.partitions.push_back(partition_from_json(p));
    } else if (key == "threshold_proofs") {
      c.threshold_proofs = get_bool(v, key);
    } else if (key == "sizes") {
      c.sizes = sizes_from_json(v);
    } else if (key == "script") {
      if (v.is_string()) {
        c.script.name = v.get<std::string>();
      } else if (v.is_object()) {
        for (const auto& [sk, sv] : v.items()) {
          if (sk == "name") {
            c.script.name = get_string(sv, "script.name");
          } else if (sk == "params") {
            if (!sv.is_object()) throw ConfigError("script.params must be an object");
            c.script.params = sv;
          } else {
            throw ConfigError(fmt::format("unknown field script.{}", sk));
          }
        }
      } else {
        throw ConfigError("script must be a name or an object");
      }
    } else if (key == "trace") {
      c.trace = get_bool(v, key);
    } else if (key == "description" || key == "comment") {
      // Free text for humans.
    } else {
      throw ConfigError(fmt::format("unknown field {}", key));
    }
  }
  if (j.contains("n") && get_number<std::uint32_t>(j["n"], "n") != c.n()) {
    throw ConfigError("n must equal 2f+1");
  }
  c.validate();
  return c;
}

json config_to_json(const SimConfig& c) {
  json j;
  j["f"] = c.f;
  j["n"] = c.n();
  j["batch_size"] = c.batch_size;
  j["tx_size"] = c.tx_size;
  j["clients"] = c.clients;
  j["requests_per_client"] = c.requests_per_client;
  j["seed"] = c.seed;
  j["mode"] = std::string(protocol::to_string(c.mode));
  j["decisions"] = c.decisions;
  j["pipelining"] = c.pipelining;
  j["pipeline_depth"] = c.pipeline_depth;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["reply_policy"] = std::string(clients::to_string(c.reply_policy));
  j["tc_mode"] = std::string(tc::to_string(c.tc_mode));
  j["vulnerable_tc"] = c.vulnerable_tc;
  j["counter_acceptance"] = std::string(protocol::to_string(c.counter_acceptance));
  j["tc_window"] = c.tc_window;
  j["drop_rate"] = c.drop_rate;
  j["threshold_proofs"] = c.threshold_proofs;
  j["trace"] = c.trace;
  for (const auto& [name, field] : kTimes) j[name + "_ms"] = ns_to_ms(c.*field);
  j["partitions"] = json::array();
  for (const auto& p : c.partitions) {
    j["partitions"].push_back({{"start_ms", ns_to_ms(p.start)}, {"end_ms", ns_to_ms(p.end)}, {"groups", p.groups}});
  }
  j["sizes"] = {{"header_bytes", c.sizes.header_bytes}, {"hash_bytes", c.sizes.hash_bytes},
                {"sig_bytes", c.sizes.sig_bytes},       {"ui_bytes", c.sizes.ui_bytes},
                {"tx_bytes", c.sizes.tx_bytes},         {"threshold_proof_bytes", c.sizes.threshold_proof_bytes}};
  j["script"] = {{"name", c.script.name}, {"params", c.script.params}};
  return j;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(fmt::format("override '{}' is not path=value", assignment));
  std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  if (path.rfind("sim.", 0) == 0) path = path.substr(4);

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("override '{}' has an empty path segment", assignment));
    if (!node->is_object()) throw ConfigError(fmt::format("override '{}' descends into a non-object", assignment));
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if ((*node)[part].is_null()) (*node)[part] = json::object();
    if (part == "script" && (*node)[part].is_string()) (*node)[part] = json{{"name", (*node)[part]}};
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace tcbft::sim
