#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "tcbft/cost/size_model.hpp"

namespace tcbft::cost {

/// slope * f + constant, kept symbolic so table rows can be compared as
/// expressions rather than numbers.
struct Affine {
  std::int64_t slope = 0;
  std::int64_t constant = 0;

  double at(double f) const { return static_cast<double>(slope) * f + static_cast<double>(constant); }
  std::string symbolic() const;
  bool operator==(const Affine&) const = default;
};

enum class Protocol : std::uint8_t { pbft, flexi_bft, minbft, zyzzyva, flexi_zz, minzz };
constexpr std::array<Protocol, 6> kProtocols{Protocol::pbft,    Protocol::flexi_bft, Protocol::minbft,
                                             Protocol::zyzzyva, Protocol::flexi_zz,  Protocol::minzz};

std::string_view to_string(Protocol p);
/// Accepts the display names and lower-case forms ("minbft", "flexi-bft").
Protocol protocol_from_string(std::string_view name);

/// Normal-case resource usage per consensus instance, leading order.
struct CostVector {
  Protocol protocol = Protocol::minbft;
  Affine leader_msgs;      // messages handled by the leader
  Affine crypto_signs;     // signature generations at the busiest replica
  Affine crypto_verifies;  // signature verifications at the busiest replica
  Affine tc_accesses;      // sequential TC accesses per consensus

  Affine crypto_total() const {
    return {crypto_signs.slope + crypto_verifies.slope, crypto_signs.constant + crypto_verifies.constant};
  }
  /// "1+2f" style: signs then verifies.
  std::string crypto_symbolic() const;
};

CostVector table1_costs(Protocol p);

/// A non-negative rational.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Extra leader bandwidth of a 3f+1 protocol over its 2f+1 counterpart:
/// (3f+1)/(2f+1) - 1.
Fraction leader_bandwidth_ratio(std::uint64_t f);

/// Leading-order ratio of signature verifications per replica, a over b.
double verification_ratio(Protocol a, Protocol b);

/// Messages of the implemented protocol in a fault-free run where every
/// batch is full. Clients send each request to all n replicas; every
/// replica replies; the leader's Prepare goes to the 2f followers; each
/// follower sends its Commit to the other n-1 replicas; with zero decision
/// delay every non-leader sends a Decision to every replica except itself
/// and the leader.
struct MessageCounts {
  std::uint64_t requests = 0;
  std::uint64_t replies = 0;
  std::uint64_t prepares = 0;
  std::uint64_t commits = 0;
  std::uint64_t decisions = 0;

  std::uint64_t baseline() const { return requests + replies + prepares + commits; }
  std::uint64_t total() const { return baseline() + decisions; }
};

MessageCounts minbft_messages(std::uint64_t f, std::uint64_t batch_size, std::uint64_t batches, bool decisions);

/// Byte totals for the same run under a size model.
struct ByteCounts {
  std::uint64_t baseline = 0;
  std::uint64_t decisions = 0;

  std::uint64_t total() const { return baseline + decisions; }
};

ByteCounts minbft_bytes(std::uint64_t f, std::uint64_t batch_size, std::uint64_t batches, bool decisions,
                        const SizeModel& sizes, bool threshold);

/// Decision messages per ordered operation over baseline messages per
/// ordered operation: [(n-1)(n-2)/B] / [2n + (2f + 2f(n-1))/B].
double decision_msg_overhead(std::uint64_t f, std::uint64_t batch_size);

/// Byte-weighted analogue of decision_msg_overhead.
double decision_byte_overhead(std::uint64_t f, std::uint64_t batch_size, const SizeModel& sizes, bool threshold);

/// Byte-overhead figures the size model is fitted against.
struct BytePoint {
  std::uint64_t f = 0;
  std::size_t tx_bytes = 0;
  double target = 0;  // fraction
};
constexpr std::array<BytePoint, 4> kBytePoints{
    BytePoint{10, 256, 0.10}, BytePoint{30, 256, 0.89}, BytePoint{10, 1024, 0.03}, BytePoint{30, 1024, 0.23}};
constexpr std::uint64_t kCalibrationBatch = 500;

struct Calibration {
  std::size_t ui_bytes = 0;
  double squared_error = 0;  // sum over the points, in percentage points squared
  std::array<double, 4> fitted{};
};

/// Grid search over ui_bytes in [lo, hi] with the given step, all other
/// sizes held fixed, minimising the summed squared error against
/// kBytePoints at B = kCalibrationBatch.
Calibration calibrate_ui_bytes(const SizeModel& base, std::size_t lo = 10, std::size_t hi = 1020,
                               std::size_t step = 10);

}  // namespace tcbft::cost
