#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcbft/sim/config.hpp"

namespace tcbft::sim {

/// A short run of `script` at threshold f whose timing, attack point,
/// mode, batching and network are all drawn from `seed`.
SimConfig random_suite_config(const std::string& script, std::uint32_t f, std::uint64_t seed);

struct SuiteResult {
  std::uint64_t runs = 0;
  std::uint64_t unsafe = 0;             // runs the safety oracle rejected
  std::uint64_t view_changes = 0;       // runs where a correct replica left view 0
  std::vector<std::string> failures;    // "seed N: first violation", at most a few
};

/// Runs seeds [first, first + count) and judges each with the safety oracle.
SuiteResult run_seed_suite(const std::string& script, std::uint32_t f, std::uint64_t first, std::uint64_t count);

}  // namespace tcbft::sim
