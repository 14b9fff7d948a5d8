#ifndef QFOOL_ATTACK_NONTARGETED_HPP
#define QFOOL_ATTACK_NONTARGETED_HPP

#include <cstdint>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/ledger.hpp"
#include "qfool/oracle.hpp"
#include "qfool/trace.hpp"

namespace qfool {

// Whether to spend another batch of n_u probes in the current iteration.
// True on the first pass (n_i == 0); afterwards true while
//   d_new / (n_i + n_u) <= epsilon * d_old / n_i
// where d_new and d_old are the distances of the current and previous
// candidates from the reference point.
bool InnerLoopGate(double d_new, double d_old, std::int64_t n_i, std::int64_t n_u, double epsilon);
bool InnerLoopGate(const Point& current, const Point& previous, const Point& reference,
                   std::int64_t n_i, std::int64_t n_u, double epsilon);

// Non-targeted attack on x0 with every query billed to `ledger`.
//
// Throws InitialPointNotFound when no misclassified starting point is found
// within the budget. Every other outcome is returned in the trace, which
// holds the closest adversarial point seen.
AttackTrace RunQFool(const DecisionOracle& oracle, const Point& x0, const AttackConfig& config,
                     QueryLedger& ledger);
AttackTrace RunQFool(const DecisionOracle& oracle, const Point& x0, const AttackConfig& config);

}  // namespace qfool

#endif  // QFOOL_ATTACK_NONTARGETED_HPP
