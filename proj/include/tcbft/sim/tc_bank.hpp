#pragma once

#include <memory>
#include <vector>

#include "tcbft/tc/trusted_component.hpp"

namespace tcbft::sim {

/// The simulator's custody of every trusted component in a run. Copying a
/// bank duplicates the components, which state exploration relies on.
class TcBank {
 public:
  TcBank() = default;
  TcBank(const TcBank& other);
  TcBank& operator=(const TcBank& other);
  TcBank(TcBank&&) noexcept = default;
  TcBank& operator=(TcBank&&) noexcept = default;

  void add(tc::TrustedComponent component);
  std::size_t size() const { return live_.size(); }
  tc::TrustedComponent& at(ReplicaId replica) { return *live_.at(replica); }
  const tc::TrustedComponent& at(ReplicaId replica) const { return *live_.at(replica); }

  /// Install `component` for its replica. The previous instance is kept for
  /// the certificate audit.
  void replace(tc::TrustedComponent component);

  /// Every certificate issued by any instance, current or retired.
  std::vector<tc::UniqueIdentifier> all_issued() const;

 private:
  std::vector<std::unique_ptr<tc::TrustedComponent>> live_;
  std::vector<std::shared_ptr<const tc::TrustedComponent>> retired_;
};

}  // namespace tcbft::sim
