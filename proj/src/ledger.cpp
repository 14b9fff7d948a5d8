#include "qfool/ledger.hpp"

#include "qfool/core.hpp"

namespace qfool {

void QueryLedger::Charge(std::string_view phase, std::int64_t count) {
  if (count < 0) throw ContractViolation("ledger charges must be non-negative");
  if (count == 0) return;
  std::lock_guard<std::mutex> lock(mu_);
  auto it = phases_.find(phase);
  if (it == phases_.end()) it = phases_.emplace(std::string(phase), 0).first;
  it->second += count;
  used_.fetch_add(count, std::memory_order_acq_rel);
}

std::int64_t QueryLedger::used(std::string_view phase) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = phases_.find(phase);
  return it == phases_.end() ? 0 : it->second;
}

std::map<std::string, std::int64_t> QueryLedger::per_phase() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {phases_.begin(), phases_.end()};
}

void QueryLedger::Reset() {
  std::lock_guard<std::mutex> lock(mu_);
  phases_.clear();
  used_.store(0, std::memory_order_release);
}

}  // namespace qfool
