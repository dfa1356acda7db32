#include "tcbft/cli/report.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>

namespace tcbft::cli {

using nlohmann::json;
using protocol::MsgKind;

namespace {

double to_ms(TimeNs t) { return static_cast<double>(t) / static_cast<double>(kMillisecond); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string verdict_line(const sim::Verdicts& v) {
  if (!v.safety_ok()) return "safety violated";
  if (!v.liveness_ok() || !v.responsive()) {
    return v.liveness_ok() ? "clients stalled, consensus live, safety preserved" : "liveness lost, safety preserved";
  }
  return "all clients completed, safety preserved";
}

}  // namespace

std::string tally_row(const sim::Trace& trace, const std::optional<sim::Overhead>& overhead) {
  const auto& c = trace.config;
  std::string ovh_msgs;
  std::string ovh_bytes;
  if (overhead) {
    ovh_msgs = fmt::format("{:.6f}", overhead->msgs);
    ovh_bytes = fmt::format("{:.6f}", overhead->bytes);
  }
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", c.f, c.n(), c.batch_size, to_ms(c.delta), c.decisions ? 1 : 0,
                     trace.tally.msgs_total(), trace.tally.of(MsgKind::decision), trace.tally.bytes_total(), ovh_msgs,
                     ovh_bytes);
}

std::string trace_jsonl(const sim::Trace& trace) {
  std::string out;
  for (const auto& line : trace.events) {
    out += line;
    out += '\n';
  }
  return out;
}

json summary_json(const sim::Trace& trace) {
  const auto& v = trace.verdicts;
  json clients = json::array();
  for (const auto& c : v.clients) {
    json entry{{"client", c.client}, {"completed", c.completed}, {"status", c.stalled ? "stalled" : "completed"}};
    if (c.stalled) entry["stalled_request"] = c.stalled_seq;
    clients.push_back(std::move(entry));
  }
  json replicas = json::array();
  for (const auto& r : trace.replicas) {
    replicas.push_back({{"id", r.id},
                        {"faulty", r.faulty},
                        {"crashed", r.crashed},
                        {"halted", r.halted},
                        {"view", r.view},
                        {"in_view_change", r.in_view_change},
                        {"executed", r.executed},
                        {"stable", r.stable},
                        {"cursors", r.cursors},
                        {"tc_accesses", r.tc_accesses},
                        {"certificates", r.certificates}});
  }
  json msgs = json::object();
  json bytes = json::object();
  for (std::size_t k = 0; k < protocol::kMsgKinds; ++k) {
    if (trace.tally.msgs[k] == 0) continue;
    const std::string name(protocol::to_string(static_cast<MsgKind>(k)));
    msgs[name] = trace.tally.msgs[k];
    bytes[name] = trace.tally.bytes[k];
  }
  const auto res = sim::tally_of(trace);
  json highlights = json::array();
  for (const auto& h : trace.highlights) highlights.push_back({{"t_ms", to_ms(h.time)}, {"text", h.text}});

  return {{"config", sim::config_to_json(trace.config)},
          {"end_ms", to_ms(trace.end)},
          {"verdicts",
           {{"safety", v.safety_ok() ? json("ok") : json{{"violated", v.safety}}},
            {"liveness", v.liveness_ok() ? json("all-committed") : json{{"stalled", v.liveness}}},
            {"termination", v.termination_ok() ? json("ok") : json{{"unterminated", v.unterminated}}},
            {"responsiveness", clients},
            {"summary", verdict_line(v)}}},
          {"ops_completed", trace.ops_completed},
          {"batches_committed", trace.batches_committed},
          {"tally",
           {{"msgs", msgs},
            {"bytes", bytes},
            {"msgs_total", res.msgs_total},
            {"bytes_total", res.bytes_total},
            {"replica_link_bytes", res.replica_link_bytes},
            {"client_link_bytes", res.client_link_bytes},
            {"dropped", trace.tally.dropped},
            {"withheld", trace.tally.withheld},
            {"certificates", res.certificates},
            {"tc_accesses", res.tc_accesses}}},
          {"replicas", replicas},
          {"highlights", highlights}};
}

std::string latency_csv(const sim::Trace& trace) {
  std::string out = "client,seq,submit_t,complete_t\n";
  for (const auto& l : trace.latencies) {
    out += fmt::format("{},{},{},{}\n", l.client, l.client_seq, l.submit, l.complete);
  }
  return out;
}

std::string narrative(const sim::Trace& trace) {
  const auto& c = trace.config;
  std::string out;
  out += fmt::format("scenario {} with f={} (n={}), {} mode, decisions {}, reply policy {}, seed {}\n", c.script.name,
                     c.f, c.n(), protocol::to_string(c.mode), c.decisions ? "on" : "off",
                     clients::to_string(c.reply_policy), c.seed);
  out += "\nwhat happened:\n";
  if (trace.highlights.empty()) out += "  nothing noteworthy\n";
  for (const auto& h : trace.highlights) out += fmt::format("  {:9.1f} ms  {}\n", to_ms(h.time), h.text);

  out += fmt::format("\nreplicas at {:.1f} ms:\n", to_ms(trace.end));
  for (const auto& r : trace.replicas) {
    std::string status = r.faulty ? "faulty" : "correct";
    if (r.crashed) status += ", down";
    if (r.halted) status += ", trusted component stopped";
    std::vector<std::string> cursors;
    for (std::size_t s = 0; s < r.cursors.size(); ++s) {
      if (s != r.id) cursors.push_back(fmt::format("{}:{}", s, r.cursors[s]));
    }
    std::vector<std::size_t> flagged;
    for (std::size_t s = 0; s < r.flagged.size(); ++s) {
      if (r.flagged[s]) flagged.push_back(s);
    }
    out += fmt::format("  replica {} ({}): view {}{}, executed {}, cursors {}{}\n", r.id, status, r.view,
                       r.in_view_change ? " (changing view)" : "", r.executed, fmt::join(cursors, " "),
                       flagged.empty() ? "" : fmt::format(", flagged {}", fmt::join(flagged, ",")));
  }

  const auto& v = trace.verdicts;
  out += "\nclients:\n";
  for (const auto& cl : v.clients) {
    if (cl.stalled) {
      out += fmt::format("  client {} stalled on request {} after {} completed\n", cl.client, cl.stalled_seq,
                         cl.completed);
    } else {
      out += fmt::format("  client {} completed {} requests\n", cl.client, cl.completed);
    }
  }
  out += "\nverdict:\n";
  if (v.safety_ok()) {
    out += "  safety ok\n";
  } else {
    for (const auto& s : v.safety) out += fmt::format("  safety violated: {}\n", s);
  }
  if (v.liveness_ok()) {
    out += "  liveness ok\n";
  } else {
    for (const auto& s : v.liveness) out += fmt::format("  liveness: {}\n", s);
  }
  out += fmt::format("  {}\n", verdict_line(v));
  return out;
}

void write_run_files(const sim::Trace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "trace.jsonl", trace_jsonl(trace));
  write_file(dir / "summary.json", summary_json(trace).dump(2) + "\n");
  write_file(dir / "tallies.csv", std::string(kTallyHeader) + "\n" + tally_row(trace) + "\n");
  write_file(dir / "latency.csv", latency_csv(trace));
}

}  // namespace tcbft::cli
