#ifndef QFOOL_BASELINE_HPP
#define QFOOL_BASELINE_HPP

#include <optional>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/ledger.hpp"
#include "qfool/oracle.hpp"
#include "qfool/trace.hpp"

namespace qfool {

// Simplified Boundary attack. Each step draws a random move orthogonal to
// (x0 - x_adv) of relative size `spherical_step` that keeps the distance to
// x0, then contracts toward x0 by `source_step`; the contracted point replaces
// x_adv when it is still adversarial. Every 10 proposals the spherical step is
// scaled by 1.5 toward a 50% hit rate and the source step toward 25%.
//
// Starts from the initial-point search (non-targeted) or from the first
// target-class point on the segment x0 -> anchor (targeted; the anchor's
// label is the target). Throws InitialPointNotFound when no start is found.
AttackTrace RunBoundaryAttack(const DecisionOracle& oracle, const Point& x0,
                              const AttackConfig& config, QueryLedger& ledger,
                              const std::optional<Point>& anchor = std::nullopt);

// One Gaussian direction r, scaled up from initial_sigma * sqrt(d) by
// sigma_growth until clip(x0 + s r) is misclassified, then bisected on s.
// Unsuccessful when the ray leaves the box first.
AttackTrace RunGaussianNoiseAttack(const DecisionOracle& oracle, const Point& x0,
                                   const AttackConfig& config, QueryLedger& ledger);

}  // namespace qfool

#endif  // QFOOL_BASELINE_HPP
