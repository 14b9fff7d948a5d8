#ifndef QFOOL_ESTIMATOR_HPP
#define QFOOL_ESTIMATOR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qfool/core.hpp"
#include "qfool/oracle.hpp"
#include "qfool/random.hpp"
#include "qfool/subspace.hpp"

namespace qfool {

// Probe-noise norm and its adjustment direction.
struct NoiseScaleState {
  double omega = 1.0;
  int phi = -1;  // +1 or -1
  double omega_min = 0.0;
  std::vector<double> rho_history;
};

// rho = 0.5 - p_plus; phi' = -sign(rho) * phi (unchanged when rho == 0);
// omega' = max(omega * (1 + phi' * rho), omega_min).
NoiseScaleState AdaptNoiseNorm(const NoiseScaleState& state, double positive_fraction);

// +1 when the label meets the criterion (differs from the original, or equals
// the target), -1 otherwise.
int LabelToSign(Label label, const AdversarialCriterion& criterion);

// Draws probe noise of an exact l2 norm, in full space or in a DCT subspace.
class NoiseSampler {
 public:
  static NoiseSampler Full(std::size_t dimension);
  static NoiseSampler Subspace(DctSubspace subspace);

  std::vector<Vector> Sample(std::size_t count, double norm, Rng& rng) const;
  std::size_t dimension() const { return dimension_; }
  const std::optional<DctSubspace>& subspace() const { return subspace_; }

 private:
  NoiseSampler(std::size_t dimension, std::optional<DctSubspace> subspace)
      : dimension_(dimension), subspace_(std::move(subspace)) {}

  std::size_t dimension_;
  std::optional<DctSubspace> subspace_;
};

struct GradientEstimate {
  Vector direction;  // unit
  std::size_t sample_count = 0;
  double positive_fraction = 0.0;
};

// sum z_i eta_i / ||sum z_i eta_i||. Throws DegenerateEstimate when the sum
// vanishes.
Vector DirectionFromSigns(std::span<const Vector> noise, std::span<const int> signs);

// Running sum of z_i * eta_i at one base point, grown batch by batch so
// earlier probes are reused when the sample grows.
class GradientAccumulator {
 public:
  GradientAccumulator(Point base, AdversarialCriterion criterion);

  // Queries `count` probes clip(base + eta_i) of norm `omega` in one batch
  // and returns the batch's positive fraction.
  double AddBatch(QuerySession& session, std::size_t count, double omega,
                  const NoiseSampler& sampler, Rng& rng, std::string_view phase = "estimation");

  // Adds already-labelled probes.
  void Add(const Vector& displacement, int sign);

  const Point& base() const { return base_; }
  std::size_t sample_count() const { return samples_; }
  double positive_fraction() const;
  bool degenerate() const { return sum_.isZero(0.0); }

  // Throws DegenerateEstimate when the signed sum is zero.
  GradientEstimate Estimate() const;

 private:
  Point base_;
  AdversarialCriterion criterion_;
  Vector sum_;
  std::size_t samples_ = 0;
  std::size_t positives_ = 0;
};

// One-shot estimate from n probes at `base` with the state's current omega.
// The state is not adapted; the caller feeds the returned positive fraction
// to AdaptNoiseNorm.
GradientEstimate EstimateGradient(QuerySession& session, const Point& base,
                                  const AdversarialCriterion& criterion, std::size_t n,
                                  const NoiseScaleState& scale, const NoiseSampler& sampler,
                                  Rng& rng, std::string_view phase = "estimation");

}  // namespace qfool

#endif  // QFOOL_ESTIMATOR_HPP
