#include "qfool/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "boundary_walk.hpp"
#include "qfool/geometry.hpp"
#include "qfool/random.hpp"

namespace qfool {
namespace {

constexpr int kAdaptWindow = 10;
constexpr double kAdaptFactor = 1.5;
constexpr double kSphericalTarget = 0.5;
constexpr double kSourceTarget = 0.25;
constexpr double kMaxSphericalStep = 1.0;
constexpr double kMaxSourceStep = 0.5;

// Scales `step` by the adaptation factor once a full window is collected.
void Adapt(std::vector<int>& window, double target, double cap, double& step) {
  if (static_cast<int>(window.size()) < kAdaptWindow) return;
  const double rate = static_cast<double>(std::count(window.begin(), window.end(), 1)) /
                      static_cast<double>(window.size());
  step = rate > target ? std::min(step * kAdaptFactor, cap) : step / kAdaptFactor;
  window.clear();
}

}  // namespace

AttackTrace RunBoundaryAttack(const DecisionOracle& oracle, const Point& x0,
                              const AttackConfig& config, QueryLedger& ledger,
                              const std::optional<Point>& anchor) {
  const AttackMode mode = anchor ? AttackMode::kTargeted : AttackMode::kNonTargeted;
  const ResolvedConfig resolved = Resolve(config, x0, mode);
  QuerySession session(oracle, ledger, resolved.total_budget);
  Rng rng = MakeRng(resolved.rng_seed);

  AttackTrace trace;
  trace.attack = anchor ? "boundary-targeted" : "boundary";
  trace.original = x0;
  trace.anchor = anchor;
  if (session.remaining() <= 0) {
    throw InitialPointNotFound("no budget to classify the original input", 0.0);
  }
  trace.original_label = session.Classify(x0, "origin");

  AdversarialCriterion criterion{trace.original_label, std::nullopt};
  SearchResult initial;
  if (anchor) {
    if (!(anchor->shape() == x0.shape())) throw ContractViolation("anchor shape differs");
    if (session.remaining() <= 0) throw InitialPointNotFound("no budget for the anchor", 0.0);
    const Label target = session.Classify(*anchor, "anchor");
    if (target == trace.original_label) {
      throw ContractViolation("anchor has the same label as the input");
    }
    criterion.target = target;
    trace.target_label = target;
    initial = TargetedLineSearch(session, x0, *anchor, criterion, resolved.tolerance,
                                 resolved.targeted_scan_probes, target, "initial");
  } else {
    initial = FindInitialPoint(session, x0, criterion, resolved, rng);
  }

  ProgressRecorder recorder(x0, resolved.perturbation_threshold);
  Point adversarial = initial.pair.outside;
  Label adversarial_label = initial.pair.outside_label.value();
  recorder.Offer(adversarial, adversarial_label, session.used());

  double spherical = resolved.spherical_step;
  double source = resolved.source_step;
  std::vector<int> spherical_hits;
  std::vector<int> source_hits;
  while (session.remaining() >= 2) {
    if (resolved.perturbation_threshold && recorder.best_norm() <= *resolved.perturbation_threshold) {
      break;
    }
    const Vector diff = x0.values() - adversarial.values();
    const double dist = diff.norm();
    if (dist == 0.0) break;
    Vector eta = GaussianVector(rng, x0.dim());
    eta -= (eta.dot(diff) / (dist * dist)) * diff;
    const double eta_norm = eta.norm();
    if (eta_norm == 0.0) continue;
    eta *= spherical * dist / eta_norm;
    const Point candidate =
        x0.WithValues(x0.values() - (diff - eta) / std::sqrt(1.0 + spherical * spherical));

    const Label label = session.Classify(candidate, "spherical");
    if (!criterion.IsAdversarial(label)) {
      spherical_hits.push_back(0);
    } else {
      spherical_hits.push_back(1);
      const Point contracted = candidate.Moved(x0.values() - candidate.values(), source);
      const Label contracted_label = session.Classify(contracted, "source");
      if (criterion.IsAdversarial(contracted_label)) {
        adversarial = contracted;
        adversarial_label = contracted_label;
        recorder.Offer(adversarial, adversarial_label, session.used());
        source_hits.push_back(1);
      } else {
        source_hits.push_back(0);
      }
    }
    Adapt(spherical_hits, kSphericalTarget, kMaxSphericalStep, spherical);
    Adapt(source_hits, kSourceTarget, kMaxSourceStep, source);
  }

  detail::FinishTrace(trace, recorder, session);
  return trace;
}

AttackTrace RunGaussianNoiseAttack(const DecisionOracle& oracle, const Point& x0,
                                   const AttackConfig& config, QueryLedger& ledger) {
  const ResolvedConfig resolved = Resolve(config, x0, AttackMode::kNonTargeted);
  QuerySession session(oracle, ledger, resolved.total_budget);
  Rng rng = MakeRng(resolved.rng_seed);

  AttackTrace trace;
  trace.attack = "gaussian";
  trace.original = x0;
  ProgressRecorder recorder(x0, resolved.perturbation_threshold);
  if (session.remaining() <= 0) {
    trace.failure = "budget exhausted";
    trace.original_label = Label{};
    detail::FinishTrace(trace, recorder, session);
    return trace;
  }
  trace.original_label = session.Classify(x0, "origin");
  const AdversarialCriterion criterion{trace.original_label, std::nullopt};

  Vector r = GaussianVector(rng, x0.dim());
  r /= r.norm();
  const double seed = resolved.initial_sigma * std::sqrt(static_cast<double>(x0.dim()));
  try {
    const SearchResult found =
        DirectionalSearch(session, x0, r, criterion, resolved.tolerance, seed, {}, "noise");
    recorder.Offer(found.pair.outside, found.pair.outside_label.value(), session.used());
  } catch (const DirectionNotAdversarial& e) {
    trace.failure = e.what();
  } catch (const BudgetExhausted& e) {
    trace.failure = e.what();
  }
  detail::FinishTrace(trace, recorder, session);
  return trace;
}

}  // namespace qfool
