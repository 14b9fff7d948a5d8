#ifndef QFOOL_GEOMETRY_HPP
#define QFOOL_GEOMETRY_HPP

#include <cstdint>
#include <optional>
#include <string_view>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/oracle.hpp"
#include "qfool/random.hpp"

namespace qfool {

// A bracket around the decision boundary.
struct BoundaryPair {
  Point inside;   // criterion not met
  Point outside;  // criterion met
  double gap = 0.0;
  // Label of `outside` when it has been observed or supplied.
  std::optional<Label> outside_label;
};

struct SearchResult {
  BoundaryPair pair;
  std::int64_t queries = 0;
};

// Labels the caller already knows, so the search can skip re-querying.
struct KnownLabels {
  std::optional<Label> inside;
  std::optional<Label> outside;
};

// Draws r ~ N(0, sigma^2 I), growing sigma by `sigma_growth` up to
// `sigma_cap` until clip(x0 + r) meets the criterion, then bisects along r.
// After `max_initial_draws` misses at the cap, or when the budget runs out,
// throws InitialPointNotFound with the sigma reached.
SearchResult FindInitialPoint(QuerySession& session, const Point& x0,
                              const AdversarialCriterion& criterion, const ResolvedConfig& config,
                              Rng& rng, std::string_view phase = "initial");

// Midpoint bisection on [inside, outside] until the gap is at most
// `tolerance`. Endpoints whose labels are not supplied are verified first
// (throwing BracketInvalid if the bracket is wrong). Identical endpoints are
// rejected; a gap already within tolerance is returned without queries.
// Stops early, keeping the current bracket, when the session's budget is spent.
SearchResult BinarySearchBoundary(QuerySession& session, const Point& inside, const Point& outside,
                                  const AdversarialCriterion& criterion, double tolerance,
                                  KnownLabels known = {}, std::string_view phase = "bisection");

// Marches x0 + beta * direction with beta = seed, 2 seed, 4 seed, ... (never
// past `max_step` when given) until the criterion holds, then bisects the last
// step. x0 must be known not to meet the criterion. Throws
// DirectionNotAdversarial when the ray leaves the box or reaches the cap
// without crossing.
SearchResult DirectionalSearch(QuerySession& session, const Point& x0, const Vector& direction,
                               const AdversarialCriterion& criterion, double tolerance,
                               double seed_step, std::optional<double> max_step = {},
                               std::string_view phase = "directional");

// First entry into the target class along x0 -> anchor: scans `probes`
// evenly spaced points to bracket the first target region, then bisects.
// The anchor is verified unless its label is supplied; BracketInvalid if it
// is not the target.
SearchResult TargetedLineSearch(QuerySession& session, const Point& x0, const Point& anchor,
                                const AdversarialCriterion& criterion, double tolerance,
                                int probes, std::optional<Label> anchor_label = {},
                                std::string_view phase = "line_search");

}  // namespace qfool

#endif  // QFOOL_GEOMETRY_HPP
