#include "boundary_walk.hpp"

#include <algorithm>
#include <cmath>

#include "qfool/attack_nontargeted.hpp"

namespace qfool::detail {

NoiseSampler MakeSampler(const ResolvedConfig& config, const Shape& shape) {
  if (config.subspace_side) {
    return NoiseSampler::Subspace(DctSubspace(shape, *config.subspace_side,
                                              config.per_channel_subspace));
  }
  return NoiseSampler::Full(shape.size());
}

std::int64_t SearchReserve(const Point& x0, double tolerance) {
  const double diameter = x0.box().Diameter(x0.dim());
  return 1 + static_cast<std::int64_t>(std::ceil(std::log2(std::max(diameter / tolerance, 1.0))));
}

WalkState RunBoundaryWalk(QuerySession& session, const Point& x0,
                          const AdversarialCriterion& criterion, const ResolvedConfig& config,
                          const Candidate& start, Rng& rng, std::int64_t reserve,
                          const ProposeFn& propose, ProgressRecorder& recorder,
                          AttackTrace& trace) {
  WalkState state;
  const NoiseSampler sampler = MakeSampler(config, x0.shape());
  NoiseScaleState scale{config.initial_noise_norm, -1, config.tolerance, {}};
  const auto reached_threshold = [&] {
    return config.perturbation_threshold && recorder.has_best() &&
           recorder.best_norm() <= *config.perturbation_threshold;
  };

  Candidate current = start;
  bool out_of_budget = false;
  while (!out_of_budget && !reached_threshold() && session.remaining() - reserve > 0) {
    const std::int64_t iteration_start = session.used();
    GradientAccumulator acc(current.point, criterion);
    Candidate adversarial = current;
    double d_new = x0.DistanceTo(adversarial.point);
    double d_old = d_new;
    std::int64_t n_i = 0;
    int degenerate = 0;
    double last_fraction = 0.0;
    Vector iteration_direction;

    while (InnerLoopGate(d_new, d_old, n_i, config.unit_batch, config.improvement_threshold)) {
      const std::int64_t k = std::min(config.unit_batch, session.remaining() - reserve);
      if (k <= 0) break;
      d_old = d_new;
      last_fraction =
          acc.AddBatch(session, static_cast<std::size_t>(k), scale.omega, sampler, rng);
      n_i += k;
      scale = AdaptNoiseNorm(scale, last_fraction);
      if (acc.degenerate()) {
        if (++degenerate > config.max_degenerate_retries) break;
        continue;
      }
      const Vector direction = acc.Estimate().direction;
      iteration_direction = direction;
      state.last_direction = direction;
      std::optional<Candidate> candidate;
      try {
        candidate = propose(session, current.point, direction, d_old);
      } catch (const BudgetExhausted&) {
        out_of_budget = true;
      }
      if (candidate) {
        const double d = x0.DistanceTo(candidate->point);
        if (d < d_old) {
          adversarial = std::move(*candidate);
          d_new = d;
          recorder.Offer(adversarial.point, adversarial.label, session.used());
        }
      }
      if (out_of_budget || reached_threshold()) break;
    }
    if (n_i == 0) break;

    IterationRecord record;
    record.start = current.point;
    record.direction = iteration_direction;
    record.adversarial = adversarial.point;
    record.perturbation_norm = x0.DistanceTo(adversarial.point);
    record.estimation_queries = n_i;
    record.queries = session.used() - iteration_start;
    record.noise_norm = scale.omega;
    record.positive_fraction = last_fraction;
    trace.iterations.push_back(std::move(record));
    current = std::move(adversarial);
  }
  return state;
}

void FinishTrace(AttackTrace& trace, const ProgressRecorder& recorder,
                 const QuerySession& session) {
  trace.total_queries = session.used();
  trace.queries_by_phase = {session.per_phase().begin(), session.per_phase().end()};
  trace.curve = recorder.curve();
  trace.queries_to_threshold = recorder.queries_to_threshold();
  trace.success = recorder.has_best();
  if (recorder.has_best()) {
    trace.final_point = recorder.best();
    trace.final_label = recorder.best_label();
  } else {
    trace.final_point = trace.original;
    trace.final_label = trace.original_label;
    if (trace.failure.empty()) trace.failure = "no adversarial point found";
  }
}

}  // namespace qfool::detail
