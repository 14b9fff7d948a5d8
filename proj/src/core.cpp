#include "qfool/core.hpp"

#include <algorithm>
#include <cmath>

namespace qfool {

std::string Shape::ToString() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

double Box::Diameter(std::size_t d) const { return range() * std::sqrt(static_cast<double>(d)); }

Vector Clip(const Vector& values, const Box& box) {
  return values.cwiseMax(box.lo).cwiseMin(box.hi);
}

Point::Point(Vector values, Shape shape, Box box)
    : values_(std::move(values)), shape_(shape), box_(box) {
  if (shape_.height <= 0 || shape_.width <= 0 || shape_.channels <= 0) {
    throw ContractViolation("shape must be positive, got " + shape_.ToString());
  }
  if (static_cast<std::size_t>(values_.size()) != shape_.size()) {
    throw ContractViolation("point has " + std::to_string(values_.size()) +
                            " values but shape " + shape_.ToString());
  }
  if (!(box_.lo < box_.hi)) throw ContractViolation("box requires lo < hi");
  values_ = Clip(values_, box_);
}

Point Point::Moved(const Vector& direction, double step) const {
  return WithValues(values_ + step * direction);
}

double Point::DistanceTo(const Point& other) const {
  if (other.dim() != dim()) throw ContractViolation("distance between points of different size");
  return (values_ - other.values_).norm();
}

double MeanSquaredPerturbation(const Point& original, const Point& adversarial) {
  if (!(original.shape() == adversarial.shape())) {
    throw ContractViolation("shape mismatch: " + original.shape().ToString() + " vs " +
                            adversarial.shape().ToString());
  }
  return (adversarial.values() - original.values()).squaredNorm() /
         static_cast<double>(original.dim());
}

double Median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median of an empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  // inf + inf stays inf; avoids inf - inf from the midpoint form.
  return lower / 2.0 + upper / 2.0;
}

double MedianMse(const std::vector<std::pair<Point, Point>>& pairs) {
  if (pairs.empty()) throw ContractViolation("median_mse needs at least one pair");
  std::vector<double> mses;
  mses.reserve(pairs.size());
  for (const auto& [original, adversarial] : pairs) {
    mses.push_back(MeanSquaredPerturbation(original, adversarial));
  }
  return Median(std::move(mses));
}

}  // namespace qfool
