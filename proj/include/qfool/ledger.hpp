#ifndef QFOOL_LEDGER_HPP
#define QFOOL_LEDGER_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

namespace qfool {

// Exact count of oracle invocations, broken down by attack phase.
// Safe to charge from several threads at once; counts never decrease
// except through Reset().
class QueryLedger {
 public:
  QueryLedger() = default;
  QueryLedger(const QueryLedger&) = delete;
  QueryLedger& operator=(const QueryLedger&) = delete;

  void Charge(std::string_view phase, std::int64_t count);

  std::int64_t used() const { return used_.load(std::memory_order_acquire); }
  std::int64_t used(std::string_view phase) const;
  std::map<std::string, std::int64_t> per_phase() const;

  void Reset();

 private:
  std::atomic<std::int64_t> used_{0};
  mutable std::mutex mu_;
  std::map<std::string, std::int64_t, std::less<>> phases_;
};

}  // namespace qfool

#endif  // QFOOL_LEDGER_HPP
