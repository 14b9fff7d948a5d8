#include "qfool/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace qfool {

SearchResult FindInitialPoint(QuerySession& session, const Point& x0,
                              const AdversarialCriterion& criterion, const ResolvedConfig& config,
                              Rng& rng, std::string_view phase) {
  const std::int64_t start = session.used();
  double sigma = std::min(config.initial_sigma, config.sigma_cap);
  int draws_at_cap = 0;
  while (true) {
    if (session.remaining() <= 0) {
      throw InitialPointNotFound("budget exhausted before any misclassified noise was found",
                                 sigma);
    }
    const Point candidate = x0.Moved(GaussianVector(rng, x0.dim()), sigma);
    const Label label = session.Classify(candidate, phase);
    if (criterion.IsAdversarial(label)) {
      SearchResult result =
          BinarySearchBoundary(session, x0, candidate, criterion, config.tolerance,
                               {criterion.original, label}, phase);
      result.queries = session.used() - start;
      return result;
    }
    if (sigma >= config.sigma_cap && ++draws_at_cap >= config.max_initial_draws) {
      throw InitialPointNotFound("no misclassified noise after " +
                                     std::to_string(draws_at_cap) + " draws at sigma " +
                                     std::to_string(sigma),
                                 sigma);
    }
    sigma = std::min(sigma * config.sigma_growth, config.sigma_cap);
  }
}

SearchResult BinarySearchBoundary(QuerySession& session, const Point& inside, const Point& outside,
                                  const AdversarialCriterion& criterion, double tolerance,
                                  KnownLabels known, std::string_view phase) {
  if (!(tolerance > 0.0)) throw ContractViolation("tolerance must be positive");
  if (inside.dim() != outside.dim()) throw ContractViolation("bracket endpoints differ in size");
  if (inside.values() == outside.values()) {
    throw BracketInvalid("bracket endpoints coincide");
  }
  double gap = inside.DistanceTo(outside);
  if (gap <= tolerance) return {{inside, outside, gap, known.outside}, 0};

  const std::int64_t start = session.used();
  if (!known.inside) {
    const Label label = session.Classify(inside, phase);
    if (criterion.IsAdversarial(label)) throw BracketInvalid("inside endpoint meets the criterion");
  }
  std::optional<Label> outside_label = known.outside;
  if (!outside_label) {
    const Label label = session.Classify(outside, phase);
    if (!criterion.IsAdversarial(label)) {
      throw BracketInvalid("outside endpoint does not meet the criterion");
    }
    outside_label = label;
  }

  Point a = inside;
  Point b = outside;
  while (gap > tolerance && session.remaining() > 0) {
    Point mid = a.WithValues(0.5 * (a.values() + b.values()));
    const Label label = session.Classify(mid, phase);
    if (criterion.IsAdversarial(label)) {
      b = std::move(mid);
      outside_label = label;
    } else {
      a = std::move(mid);
    }
    gap *= 0.5;
  }
  return {{std::move(a), std::move(b), gap, outside_label}, session.used() - start};
}

SearchResult DirectionalSearch(QuerySession& session, const Point& x0, const Vector& direction,
                               const AdversarialCriterion& criterion, double tolerance,
                               double seed_step, std::optional<double> max_step,
                               std::string_view phase) {
  if (direction.size() != static_cast<Eigen::Index>(x0.dim())) {
    throw ContractViolation("direction size does not match the point");
  }
  if (std::abs(direction.norm() - 1.0) > 1e-6) throw ContractViolation("direction must be unit");
  if (!(seed_step > 0.0)) throw ContractViolation("seed step must be positive");
  if (max_step && !(*max_step > 0.0)) throw ContractViolation("step cap must be positive");

  const std::int64_t start = session.used();
  const double limit = 1e3 * x0.box().Diameter(x0.dim());
  double beta = max_step ? std::min(seed_step, *max_step) : seed_step;
  Point previous = x0;
  while (true) {
    Point probe = x0.Moved(direction, beta);
    if (probe.values() == previous.values()) {
      throw DirectionNotAdversarial("ray left the box without crossing the boundary");
    }
    if (session.remaining() <= 0) throw BudgetExhausted("budget spent during directional search");
    const Label label = session.Classify(probe, phase);
    if (criterion.IsAdversarial(label)) {
      SearchResult result = BinarySearchBoundary(session, previous, probe, criterion, tolerance,
                                                 {criterion.original, label}, phase);
      result.queries = session.used() - start;
      return result;
    }
    if ((max_step && beta >= *max_step) || beta > limit) {
      throw DirectionNotAdversarial("no crossing within the step limit");
    }
    previous = std::move(probe);
    beta *= 2.0;
    if (max_step) beta = std::min(beta, *max_step);
  }
}

SearchResult TargetedLineSearch(QuerySession& session, const Point& x0, const Point& anchor,
                                const AdversarialCriterion& criterion, double tolerance,
                                int probes, std::optional<Label> anchor_label,
                                std::string_view phase) {
  if (probes < 1) throw ContractViolation("need at least one scan probe");
  if (x0.dim() != anchor.dim()) throw ContractViolation("anchor size does not match the point");
  if (x0.values() == anchor.values()) throw BracketInvalid("anchor coincides with the origin");

  const std::int64_t start = session.used();
  if (!anchor_label) anchor_label = session.Classify(anchor, phase);
  if (!criterion.IsAdversarial(*anchor_label)) {
    throw BracketInvalid("anchor does not carry the wanted label");
  }

  const Vector span = anchor.values() - x0.values();
  Point previous = x0;
  for (int k = 1; k < probes && session.remaining() > 0; ++k) {
    const double alpha = static_cast<double>(k) / probes;
    Point probe = x0.WithValues(x0.values() + alpha * span);
    const Label label = session.Classify(probe, phase);
    if (criterion.IsAdversarial(label)) {
      SearchResult result = BinarySearchBoundary(session, previous, probe, criterion, tolerance,
                                                 {criterion.original, label}, phase);
      result.queries = session.used() - start;
      return result;
    }
    previous = std::move(probe);
  }
  SearchResult result = BinarySearchBoundary(session, previous, anchor, criterion, tolerance,
                                             {criterion.original, anchor_label}, phase);
  result.queries = session.used() - start;
  return result;
}

}  // namespace qfool
