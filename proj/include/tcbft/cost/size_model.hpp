#pragma once

#include <cstddef>

namespace tcbft::cost {

/// Modeled wire sizes in bytes. The defaults come from a one-off fit against
/// the published byte overheads; see calibrate_ui_bytes.
struct SizeModel {
  std::size_t header_bytes = 16;
  std::size_t hash_bytes = 32;
  std::size_t sig_bytes = 64;
  std::size_t ui_bytes = 170;
  std::size_t tx_bytes = 256;
  std::size_t threshold_proof_bytes = 96;

  std::size_t request() const { return header_bytes + tx_bytes + sig_bytes; }
  std::size_t reply() const { return header_bytes + hash_bytes; }
  std::size_t prepare(std::size_t batch_len) const {
    return header_bytes + ui_bytes + batch_len * (tx_bytes + sig_bytes);
  }
  std::size_t commit() const { return header_bytes + hash_bytes + ui_bytes; }
  std::size_t decision(std::size_t f, bool threshold) const {
    return header_bytes + hash_bytes + (threshold ? threshold_proof_bytes : (f + 1) * ui_bytes);
  }
  std::size_t checkpoint() const { return header_bytes + hash_bytes + ui_bytes; }

  bool valid() const {
    return header_bytes > 0 && hash_bytes > 0 && sig_bytes > 0 && ui_bytes > 0 && tx_bytes > 0 &&
           threshold_proof_bytes > 0;
  }
};

}  // namespace tcbft::cost
