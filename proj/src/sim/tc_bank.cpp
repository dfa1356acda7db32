#include "tcbft/sim/tc_bank.hpp"

namespace tcbft::sim {

TcBank::TcBank(const TcBank& other) : retired_(other.retired_) {
  live_.reserve(other.live_.size());
  for (const auto& c : other.live_) live_.push_back(std::unique_ptr<tc::TrustedComponent>(new tc::TrustedComponent(*c)));
}

TcBank& TcBank::operator=(const TcBank& other) {
  if (this != &other) *this = TcBank(other);
  return *this;
}

void TcBank::add(tc::TrustedComponent component) {
  live_.push_back(std::make_unique<tc::TrustedComponent>(std::move(component)));
}

void TcBank::replace(tc::TrustedComponent component) {
  auto& slot = live_.at(component.identity().replica);
  retired_.push_back(std::shared_ptr<const tc::TrustedComponent>(slot.release()));
  slot = std::make_unique<tc::TrustedComponent>(std::move(component));
}

std::vector<tc::UniqueIdentifier> TcBank::all_issued() const {
  std::vector<tc::UniqueIdentifier> out;
  for (const auto& r : retired_) out.insert(out.end(), r->issued().begin(), r->issued().end());
  for (const auto& c : live_) out.insert(out.end(), c->issued().begin(), c->issued().end());
  return out;
}

}  // namespace tcbft::sim
