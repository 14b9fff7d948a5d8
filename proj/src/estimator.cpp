#include "qfool/estimator.hpp"

#include <algorithm>

namespace qfool {

NoiseScaleState AdaptNoiseNorm(const NoiseScaleState& state, double positive_fraction) {
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    throw ContractViolation("positive fraction must lie in [0, 1]");
  }
  NoiseScaleState next = state;
  const double rho = 0.5 - positive_fraction;
  next.rho_history.push_back(rho);
  if (rho == 0.0) return next;
  const int sign_rho = rho > 0.0 ? 1 : -1;
  next.phi = -sign_rho * state.phi;
  next.omega = std::max(state.omega * (1.0 + next.phi * rho), state.omega_min);
  return next;
}

int LabelToSign(Label label, const AdversarialCriterion& criterion) {
  return criterion.IsAdversarial(label) ? 1 : -1;
}

NoiseSampler NoiseSampler::Full(std::size_t dimension) {
  if (dimension == 0) throw ContractViolation("sampler needs a positive dimension");
  return NoiseSampler(dimension, std::nullopt);
}

NoiseSampler NoiseSampler::Subspace(DctSubspace subspace) {
  const std::size_t d = subspace.full_dimension();
  return NoiseSampler(d, std::move(subspace));
}

std::vector<Vector> NoiseSampler::Sample(std::size_t count, double norm, Rng& rng) const {
  if (subspace_) return subspace_->SampleNoise(count, norm, rng);
  if (count < 1) throw ContractViolation("sample count must be at least 1");
  if (!(norm > 0.0)) throw ContractViolation("noise norm must be positive");
  std::vector<Vector> out;
  out.reserve(count);
  while (out.size() < count) {
    Vector v = GaussianVector(rng, dimension_);
    const double n = v.norm();
    if (n == 0.0) continue;
    out.push_back(v * (norm / n));
  }
  return out;
}

Vector DirectionFromSigns(std::span<const Vector> noise, std::span<const int> signs) {
  if (noise.empty() || noise.size() != signs.size()) {
    throw ContractViolation("need one sign per noise vector");
  }
  Vector sum = Vector::Zero(noise.front().size());
  for (std::size_t i = 0; i < noise.size(); ++i) sum += signs[i] * noise[i];
  const double n = sum.norm();
  if (n == 0.0) throw DegenerateEstimate("signed noise sum is zero");
  return sum / n;
}

GradientAccumulator::GradientAccumulator(Point base, AdversarialCriterion criterion)
    : base_(std::move(base)), criterion_(criterion),
      sum_(Vector::Zero(static_cast<Eigen::Index>(base_.dim()))) {}

double GradientAccumulator::AddBatch(QuerySession& session, std::size_t count, double omega,
                                     const NoiseSampler& sampler, Rng& rng,
                                     std::string_view phase) {
  const auto noise = sampler.Sample(count, omega, rng);
  std::vector<Point> probes;
  probes.reserve(count);
  for (const auto& eta : noise) probes.push_back(base_.Moved(eta, 1.0));
  const auto labels = session.ClassifyBatch(probes, phase);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const int sign = LabelToSign(labels[i], criterion_);
    if (sign > 0) ++positives;
    // The displacement actually queried, which differs from eta only where
    // the probe was clipped.
    Add(probes[i].values() - base_.values(), sign);
  }
  return static_cast<double>(positives) / static_cast<double>(count);
}

void GradientAccumulator::Add(const Vector& displacement, int sign) {
  sum_ += sign * displacement;
  ++samples_;
  if (sign > 0) ++positives_;
}

double GradientAccumulator::positive_fraction() const {
  return samples_ == 0 ? 0.0 : static_cast<double>(positives_) / static_cast<double>(samples_);
}

GradientEstimate GradientAccumulator::Estimate() const {
  const double n = sum_.norm();
  if (samples_ == 0 || n == 0.0) throw DegenerateEstimate("signed noise sum is zero");
  return {sum_ / n, samples_, positive_fraction()};
}

GradientEstimate EstimateGradient(QuerySession& session, const Point& base,
                                  const AdversarialCriterion& criterion, std::size_t n,
                                  const NoiseScaleState& scale, const NoiseSampler& sampler,
                                  Rng& rng, std::string_view phase) {
  if (n < 1) throw ContractViolation("need at least one probe");
  if (sampler.dimension() != base.dim()) {
    throw ContractViolation("sampler dimension does not match the base point");
  }
  GradientAccumulator acc(base, criterion);
  acc.AddBatch(session, n, scale.omega, sampler, rng, phase);
  return acc.Estimate();
}

}  // namespace qfool
