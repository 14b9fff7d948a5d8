#include "qfool/attack_nontargeted.hpp"

#include "boundary_walk.hpp"
#include "qfool/geometry.hpp"

namespace qfool {

bool InnerLoopGate(double d_new, double d_old, std::int64_t n_i, std::int64_t n_u,
                   double epsilon) {
  if (n_i == 0) return true;
  return d_new * static_cast<double>(n_i) <= epsilon * d_old * static_cast<double>(n_i + n_u);
}

bool InnerLoopGate(const Point& current, const Point& previous, const Point& reference,
                   std::int64_t n_i, std::int64_t n_u, double epsilon) {
  return InnerLoopGate(current.DistanceTo(reference), previous.DistanceTo(reference), n_i, n_u,
                       epsilon);
}

AttackTrace RunQFool(const DecisionOracle& oracle, const Point& x0, const AttackConfig& config,
                     QueryLedger& ledger) {
  const ResolvedConfig resolved = Resolve(config, x0, AttackMode::kNonTargeted);
  QuerySession session(oracle, ledger, resolved.total_budget);
  Rng rng = MakeRng(resolved.rng_seed);

  AttackTrace trace;
  trace.attack = resolved.subspace_side ? "qfool-subspace" : "qfool";
  trace.original = x0;
  if (session.remaining() <= 0) {
    throw InitialPointNotFound("no budget to classify the original input", 0.0);
  }
  trace.original_label = session.Classify(x0, "origin");
  const AdversarialCriterion criterion{trace.original_label, std::nullopt};

  const SearchResult initial = FindInitialPoint(session, x0, criterion, resolved, rng);
  ProgressRecorder recorder(x0, resolved.perturbation_threshold);
  const detail::Candidate start{initial.pair.outside, initial.pair.outside_label.value()};
  recorder.Offer(start.point, start.label, session.used());

  const auto propose = [&](QuerySession& s, const Point&, const Vector& direction,
                           double best_norm) -> std::optional<detail::Candidate> {
    // Probe straight at the current distance: only a closer crossing is useful.
    try {
      const SearchResult found = DirectionalSearch(s, x0, direction, criterion,
                                                   resolved.tolerance, best_norm, best_norm);
      return detail::Candidate{found.pair.outside, found.pair.outside_label.value()};
    } catch (const DirectionNotAdversarial&) {
      return std::nullopt;
    }
  };

  detail::RunBoundaryWalk(session, x0, criterion, resolved, start, rng,
                          detail::SearchReserve(x0, resolved.tolerance), propose, recorder,
                          trace);
  detail::FinishTrace(trace, recorder, session);
  return trace;
}

AttackTrace RunQFool(const DecisionOracle& oracle, const Point& x0, const AttackConfig& config) {
  QueryLedger ledger;
  return RunQFool(oracle, x0, config, ledger);
}

}  // namespace qfool
