#ifndef QFOOL_SRC_BOUNDARY_WALK_HPP
#define QFOOL_SRC_BOUNDARY_WALK_HPP

#include <functional>
#include <optional>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/estimator.hpp"
#include "qfool/oracle.hpp"
#include "qfool/random.hpp"
#include "qfool/trace.hpp"

namespace qfool::detail {

struct Candidate {
  Point point;
  Label label;
};

// Turns a direction estimated at `start` into a new adversarial candidate, or
// nothing when the direction does not lead anywhere. May throw
// BudgetExhausted.
using ProposeFn = std::function<std::optional<Candidate>(
    QuerySession& session, const Point& start, const Vector& direction, double best_norm)>;

struct WalkState {
  Vector last_direction;  // empty until an estimate succeeds
};

NoiseSampler MakeSampler(const ResolvedConfig& config, const Shape& shape);

// Queries kept back for the final search of an iteration.
std::int64_t SearchReserve(const Point& x0, double tolerance);

// Outer/inner iteration loop shared by the two qFool attacks. Starts from
// `start`, appends one IterationRecord per funded iteration and offers every
// improvement to `recorder`.
WalkState RunBoundaryWalk(QuerySession& session, const Point& x0,
                          const AdversarialCriterion& criterion, const ResolvedConfig& config,
                          const Candidate& start, Rng& rng, std::int64_t reserve,
                          const ProposeFn& propose, ProgressRecorder& recorder, AttackTrace& trace);

// Fills the trace's result fields from the recorder and session.
void FinishTrace(AttackTrace& trace, const ProgressRecorder& recorder,
                 const QuerySession& session);

}  // namespace qfool::detail

#endif  // QFOOL_SRC_BOUNDARY_WALK_HPP
