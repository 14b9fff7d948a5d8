#ifndef QFOOL_ATTACK_TARGETED_HPP
#define QFOOL_ATTACK_TARGETED_HPP

#include <optional>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/ledger.hpp"
#include "qfool/oracle.hpp"
#include "qfool/trace.hpp"

namespace qfool {

// Targeted attack: walks along the boundary of the anchor's class toward x0.
//
// The target is the anchor's label; when `target` is given it must match,
// otherwise ContractViolation. The anchor's label must differ from x0's.
// The trace records the anchor and the final parallelism cosine between
// (final point - x0) and the last direction estimate.
AttackTrace RunTargetedQFool(const DecisionOracle& oracle, const Point& x0, const Point& anchor,
                             const AttackConfig& config, QueryLedger& ledger,
                             std::optional<Label> target = {});
AttackTrace RunTargetedQFool(const DecisionOracle& oracle, const Point& x0, const Point& anchor,
                             const AttackConfig& config, std::optional<Label> target = {});

}  // namespace qfool

#endif  // QFOOL_ATTACK_TARGETED_HPP
