#include <cmath>

#include "doctest.h"
#include "tcbft/cost/model.hpp"

using namespace tcbft;
using namespace tcbft::cost;

namespace {

// Message-by-message enumeration of one full batch, kept apart from the
// closed forms in the model.
struct Enumerated {
  double baseline = 0;
  double decisions = 0;
  double baseline_bytes = 0;
  double decision_bytes = 0;
};

Enumerated enumerate_batch(std::uint64_t f, std::uint64_t batch, const SizeModel& s) {
  const std::uint64_t n = 2 * f + 1;
  const std::uint64_t leader = 0;
  Enumerated e;
  for (std::uint64_t op = 0; op < batch; ++op) {
    for (std::uint64_t r = 0; r < n; ++r) {
      e.baseline += 2;  // request in, reply out
      e.baseline_bytes += s.header_bytes + s.tx_bytes + s.sig_bytes;
      e.baseline_bytes += s.header_bytes + s.hash_bytes;
    }
  }
  for (std::uint64_t from = 0; from < n; ++from) {
    for (std::uint64_t to = 0; to < n; ++to) {
      if (from == to) continue;
      if (from == leader) {
        e.baseline += 1;
        e.baseline_bytes += s.header_bytes + s.ui_bytes + batch * (s.tx_bytes + s.sig_bytes);
        continue;
      }
      e.baseline += 1;
      e.baseline_bytes += s.header_bytes + s.hash_bytes + s.ui_bytes;
      if (to != leader) {
        e.decisions += 1;
        e.decision_bytes += s.header_bytes + s.hash_bytes + (f + 1) * s.ui_bytes;
      }
    }
  }
  return e;
}

SizeModel with_tx(std::size_t tx) {
  SizeModel s;
  s.tx_bytes = tx;
  return s;
}

}  // namespace

TEST_CASE("protocol cost rows match symbolically") {
  struct Row {
    Protocol p;
    const char* leader;
    const char* crypto;
    const char* tc;
  };
  const Row rows[] = {
      {Protocol::pbft, "6f", "1+2f", "0"},   {Protocol::flexi_bft, "3f", "1+2f", "1"},
      {Protocol::minbft, "2f", "1+f", "2"},  {Protocol::zyzzyva, "3f", "1+1", "0"},
      {Protocol::flexi_zz, "3f", "1+1", "1"}, {Protocol::minzz, "2f", "1+1", "2"},
  };
  for (const auto& row : rows) {
    CAPTURE(to_string(row.p));
    const auto c = table1_costs(row.p);
    CHECK(c.leader_msgs.symbolic() == row.leader);
    CHECK(c.crypto_symbolic() == row.crypto);
    CHECK(c.tc_accesses.symbolic() == row.tc);
  }
}

TEST_CASE("protocol names round trip") {
  for (auto p : kProtocols) CHECK(protocol_from_string(to_string(p)) == p);
  CHECK(protocol_from_string("flexi-bft") == Protocol::flexi_bft);
  CHECK(protocol_from_string("MinZZ") == Protocol::minzz);
  CHECK_THROWS(protocol_from_string("hotstuff"));
}

TEST_CASE("affine symbolic forms") {
  CHECK(Affine{0, 0}.symbolic() == "0");
  CHECK(Affine{1, 0}.symbolic() == "f");
  CHECK(Affine{2, 1}.symbolic() == "1+2f");
  CHECK(Affine{0, 7}.symbolic() == "7");
  CHECK(Affine{3, 0}.at(4) == doctest::Approx(12));
}

TEST_CASE("extra leader bandwidth is a third at f=1 and tends to one half") {
  const auto one = leader_bandwidth_ratio(1);
  CHECK(one.num == 1);
  CHECK(one.den == 3);
  double previous = 0;
  for (std::uint64_t f = 1; f <= 4096; f *= 2) {
    const double v = leader_bandwidth_ratio(f).value();
    CHECK(v == doctest::Approx((3.0 * f + 1) / (2.0 * f + 1) - 1));
    CHECK(v > previous);
    CHECK(v < 0.5);
    previous = v;
  }
  CHECK(leader_bandwidth_ratio(1'000'000).value() == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("Flexi-BFT needs twice the verifications of MinBFT in leading order") {
  CHECK(verification_ratio(Protocol::flexi_bft, Protocol::minbft) == doctest::Approx(2.0));
  CHECK(verification_ratio(Protocol::minbft, Protocol::flexi_bft) == doctest::Approx(0.5));
}

TEST_CASE("closed-form counts agree with message enumeration") {
  for (std::uint64_t f : {1, 2, 3, 10, 30}) {
    for (std::uint64_t b : {1, 10, 100, 500}) {
      CAPTURE(f);
      CAPTURE(b);
      const auto e = enumerate_batch(f, b, SizeModel{});
      const auto m = minbft_messages(f, b, 1, true);
      CHECK(static_cast<double>(m.baseline()) == e.baseline);
      CHECK(static_cast<double>(m.decisions) == e.decisions);
      CHECK(decision_msg_overhead(f, b) == doctest::Approx(e.decisions / e.baseline).epsilon(1e-12));
      for (std::size_t tx : {256u, 1024u}) {
        const auto bytes = minbft_bytes(f, b, 1, true, with_tx(tx), false);
        const auto eb = enumerate_batch(f, b, with_tx(tx));
        CHECK(static_cast<double>(bytes.baseline) == eb.baseline_bytes);
        CHECK(static_cast<double>(bytes.decisions) == eb.decision_bytes);
      }
    }
  }
}

TEST_CASE("message overhead at B=500 is about 2% for f=10 and 5% for f=30") {
  // Frozen: 760/42840 and 7080/129320.
  CHECK(decision_msg_overhead(10, 500) == doctest::Approx(760.0 / 42840.0).epsilon(1e-12));
  CHECK(decision_msg_overhead(30, 500) == doctest::Approx(7080.0 / 129320.0).epsilon(1e-12));
  CHECK(std::abs(decision_msg_overhead(10, 500) - 0.02) <= 0.005);
  CHECK(std::abs(decision_msg_overhead(30, 500) - 0.05) <= 0.007);
}

TEST_CASE("message overhead falls with B and grows with f") {
  for (std::uint64_t f = 1; f <= 40; ++f) {
    for (std::uint64_t b = 1; b <= 1024; b = b * 2 + 1) {
      CAPTURE(f);
      CAPTURE(b);
      CHECK(decision_msg_overhead(f, b + 1) < decision_msg_overhead(f, b));
      CHECK(decision_msg_overhead(f + 1, b) > decision_msg_overhead(f, b));
    }
  }
}

TEST_CASE("threshold proofs always shrink the byte overhead") {
  for (std::uint64_t f = 1; f <= 64; ++f) {
    CHECK(decision_byte_overhead(f, 500, SizeModel{}, true) < decision_byte_overhead(f, 500, SizeModel{}, false));
  }
}

TEST_CASE("overhead functions reject empty parameters") {
  CHECK_THROWS(decision_msg_overhead(0, 10));
  CHECK_THROWS(decision_msg_overhead(1, 0));
  CHECK_THROWS(decision_byte_overhead(0, 10, SizeModel{}, false));
}

TEST_CASE("calibrated size model lands within 10 points of all four byte figures") {
  for (const auto& point : kBytePoints) {
    CAPTURE(point.f);
    CAPTURE(point.tx_bytes);
    const double got = decision_byte_overhead(point.f, kCalibrationBatch, with_tx(point.tx_bytes), false);
    CHECK(std::abs(got - point.target) <= 0.10);
  }
  // Frozen outputs of the shipped sizes.
  CHECK(decision_byte_overhead(10, 500, with_tx(256), false) == doctest::Approx(0.0995).epsilon(1e-3));
  CHECK(decision_byte_overhead(30, 500, with_tx(256), false) == doctest::Approx(0.8515).epsilon(1e-3));
  CHECK(decision_byte_overhead(10, 500, with_tx(1024), false) == doctest::Approx(0.0316).epsilon(1e-2));
  CHECK(decision_byte_overhead(30, 500, with_tx(1024), false) == doctest::Approx(0.2745).epsilon(1e-3));
}

TEST_CASE("calibration grid picks the shipped ui size") {
  SizeModel base;
  base.ui_bytes = 1;
  const auto c = calibrate_ui_bytes(base);
  CHECK(c.ui_bytes == SizeModel{}.ui_bytes);
  for (std::size_t i = 0; i < kBytePoints.size(); ++i) {
    CHECK(std::abs(c.fitted[i] - kBytePoints[i].target) <= 0.10);
  }
  // Neighbouring grid points fit worse.
  for (std::size_t ui : {c.ui_bytes - 10, c.ui_bytes + 10}) {
    base.ui_bytes = ui;
    const auto neighbour = calibrate_ui_bytes(base, ui, ui, 10);
    CHECK(neighbour.squared_error > c.squared_error);
  }
  CHECK_THROWS(calibrate_ui_bytes(base, 0, 10, 1));
}
