#include "tcbft/cost/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace tcbft::cost {

std::string Affine::symbolic() const {
  auto term = [](std::int64_t s) { return s == 1 ? std::string("f") : fmt::format("{}f", s); };
  if (slope == 0) return fmt::format("{}", constant);
  if (constant == 0) return term(slope);
  return fmt::format("{}+{}", constant, term(slope));
}

std::string CostVector::crypto_symbolic() const {
  return crypto_signs.symbolic() + "+" + crypto_verifies.symbolic();
}

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::pbft: return "PBFT";
    case Protocol::flexi_bft: return "Flexi-BFT";
    case Protocol::minbft: return "MinBFT";
    case Protocol::zyzzyva: return "Zyzzyva";
    case Protocol::flexi_zz: return "Flexi-ZZ";
    case Protocol::minzz: return "MinZZ";
  }
  return "?";
}

Protocol protocol_from_string(std::string_view name) {
  auto squash = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
  };
  const std::string want = squash(name);
  for (Protocol p : kProtocols) {
    if (squash(to_string(p)) == want) return p;
  }
  throw std::invalid_argument(fmt::format("unknown protocol '{}'", name));
}

CostVector table1_costs(Protocol p) {
  switch (p) {
    case Protocol::pbft: return {p, {6, 0}, {0, 1}, {2, 0}, {0, 0}};
    case Protocol::flexi_bft: return {p, {3, 0}, {0, 1}, {2, 0}, {0, 1}};
    case Protocol::minbft: return {p, {2, 0}, {0, 1}, {1, 0}, {0, 2}};
    case Protocol::zyzzyva: return {p, {3, 0}, {0, 1}, {0, 1}, {0, 0}};
    case Protocol::flexi_zz: return {p, {3, 0}, {0, 1}, {0, 1}, {0, 1}};
    case Protocol::minzz: return {p, {2, 0}, {0, 1}, {0, 1}, {0, 2}};
  }
  throw std::invalid_argument("unknown protocol");
}

Fraction leader_bandwidth_ratio(std::uint64_t f) {
  if (f == 0) throw std::invalid_argument("f must be at least 1");
  // (3f+1)/(2f+1) - 1 = f/(2f+1)
  return {f, 2 * f + 1};
}

double verification_ratio(Protocol a, Protocol b) {
  const Affine va = table1_costs(a).crypto_verifies;
  const Affine vb = table1_costs(b).crypto_verifies;
  if (va.slope != 0 || vb.slope != 0) {
    if (vb.slope == 0) throw std::invalid_argument("denominator has no leading term");
    return static_cast<double>(va.slope) / static_cast<double>(vb.slope);
  }
  return static_cast<double>(va.constant) / static_cast<double>(vb.constant);
}

MessageCounts minbft_messages(std::uint64_t f, std::uint64_t batch_size, std::uint64_t batches, bool decisions) {
  const std::uint64_t n = 2 * f + 1;
  const std::uint64_t ops = batch_size * batches;
  MessageCounts c;
  c.requests = ops * n;
  c.replies = ops * n;
  c.prepares = batches * 2 * f;
  c.commits = batches * 2 * f * (n - 1);
  c.decisions = decisions ? batches * (n - 1) * (n - 2) : 0;
  return c;
}

ByteCounts minbft_bytes(std::uint64_t f, std::uint64_t batch_size, std::uint64_t batches, bool decisions,
                        const SizeModel& sizes, bool threshold) {
  const MessageCounts m = minbft_messages(f, batch_size, batches, decisions);
  ByteCounts b;
  b.baseline = m.requests * sizes.request() + m.replies * sizes.reply() + m.prepares * sizes.prepare(batch_size) +
               m.commits * sizes.commit();
  b.decisions = m.decisions * sizes.decision(f, threshold);
  return b;
}

double decision_msg_overhead(std::uint64_t f, std::uint64_t batch_size) {
  if (f == 0 || batch_size == 0) throw std::invalid_argument("f and B must be at least 1");
  const double n = static_cast<double>(2 * f + 1);
  const double fb = static_cast<double>(f);
  const double b = static_cast<double>(batch_size);
  const double decisions = (n - 1) * (n - 2) / b;
  const double baseline = 2 * n + (2 * fb + 2 * fb * (n - 1)) / b;
  return decisions / baseline;
}

double decision_byte_overhead(std::uint64_t f, std::uint64_t batch_size, const SizeModel& sizes, bool threshold) {
  if (f == 0 || batch_size == 0) throw std::invalid_argument("f and B must be at least 1");
  const ByteCounts b = minbft_bytes(f, batch_size, 1, true, sizes, threshold);
  return static_cast<double>(b.decisions) / static_cast<double>(b.baseline);
}

Calibration calibrate_ui_bytes(const SizeModel& base, std::size_t lo, std::size_t hi, std::size_t step) {
  if (lo == 0 || hi < lo || step == 0) throw std::invalid_argument("empty calibration grid");
  Calibration best;
  bool first = true;
  for (std::size_t ui = lo; ui <= hi; ui += step) {
    Calibration c;
    c.ui_bytes = ui;
    for (std::size_t i = 0; i < kBytePoints.size(); ++i) {
      SizeModel sizes = base;
      sizes.ui_bytes = ui;
      sizes.tx_bytes = kBytePoints[i].tx_bytes;
      c.fitted[i] = decision_byte_overhead(kBytePoints[i].f, kCalibrationBatch, sizes, false);
      const double err = 100.0 * (c.fitted[i] - kBytePoints[i].target);
      c.squared_error += err * err;
    }
    if (first || c.squared_error < best.squared_error) best = c;
    first = false;
  }
  return best;
}

}  // namespace tcbft::cost
