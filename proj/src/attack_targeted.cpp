#include "qfool/attack_targeted.hpp"

#include "boundary_walk.hpp"
#include "qfool/geometry.hpp"

namespace qfool {

AttackTrace RunTargetedQFool(const DecisionOracle& oracle, const Point& x0, const Point& anchor,
                             const AttackConfig& config, QueryLedger& ledger,
                             std::optional<Label> target) {
  if (!(anchor.shape() == x0.shape())) throw ContractViolation("anchor shape differs from input");
  const ResolvedConfig resolved = Resolve(config, x0, AttackMode::kTargeted);
  QuerySession session(oracle, ledger, resolved.total_budget);
  Rng rng = MakeRng(resolved.rng_seed);

  AttackTrace trace;
  trace.attack = resolved.subspace_side ? "qfool-targeted-subspace" : "qfool-targeted";
  trace.original = x0;
  trace.anchor = anchor;
  if (session.remaining() < 2) {
    throw InitialPointNotFound("no budget to classify the input and the anchor", 0.0);
  }
  trace.original_label = session.Classify(x0, "origin");
  const Label anchor_label = session.Classify(anchor, "anchor");
  if (target && !(*target == anchor_label)) {
    throw ContractViolation("anchor is labelled " + std::to_string(anchor_label.id) +
                            ", not the target " + std::to_string(target->id));
  }
  if (anchor_label == trace.original_label) {
    throw ContractViolation("anchor has the same label as the input");
  }
  trace.target_label = anchor_label;
  const AdversarialCriterion criterion{trace.original_label, anchor_label};

  ProgressRecorder recorder(x0, resolved.perturbation_threshold);
  const SearchResult initial =
      TargetedLineSearch(session, x0, anchor, criterion, resolved.tolerance,
                         resolved.targeted_scan_probes, anchor_label, "line_search");
  const detail::Candidate start{initial.pair.outside, anchor_label};
  recorder.Offer(start.point, start.label, session.used());

  const auto propose = [&](QuerySession& s, const Point& from, const Vector& direction,
                           double) -> std::optional<detail::Candidate> {
    // Step off the boundary into the target class, halving the step while
    // the stepped point misses it.
    double delta = resolved.targeted_step * x0.DistanceTo(from);
    for (int h = 0; h <= resolved.max_step_halvings; ++h, delta *= 0.5) {
      const Point q = from.Moved(direction, delta);
      if (q.values() == x0.values()) continue;
      if (!(s.Classify(q, "step") == anchor_label)) continue;
      const SearchResult found =
          TargetedLineSearch(s, x0, q, criterion, resolved.tolerance,
                             resolved.targeted_scan_probes, anchor_label, "line_search");
      return detail::Candidate{found.pair.outside, anchor_label};
    }
    return std::nullopt;
  };

  const std::int64_t reserve = detail::SearchReserve(x0, resolved.tolerance) +
                               resolved.targeted_scan_probes + resolved.max_step_halvings + 1;
  const detail::WalkState state = detail::RunBoundaryWalk(
      session, x0, criterion, resolved, start, rng, reserve, propose, recorder, trace);
  detail::FinishTrace(trace, recorder, session);

  if (state.last_direction.size() > 0 && trace.success) {
    const Vector v = trace.final_point.values() - x0.values();
    const double n = v.norm();
    if (n > 0.0) trace.parallelism_cosine = v.dot(state.last_direction) / n;
  }
  return trace;
}

AttackTrace RunTargetedQFool(const DecisionOracle& oracle, const Point& x0, const Point& anchor,
                             const AttackConfig& config, std::optional<Label> target) {
  QueryLedger ledger;
  return RunTargetedQFool(oracle, x0, anchor, config, ledger, target);
}

}  // namespace qfool
