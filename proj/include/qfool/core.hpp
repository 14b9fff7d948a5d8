#ifndef QFOOL_CORE_HPP
#define QFOOL_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace qfool {

using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors. Every failure an attack can report has its own type so callers can
// tell a starved budget from a malformed input.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

class InitialPointNotFound : public Error {
 public:
  InitialPointNotFound(const std::string& what, double sigma_reached)
      : Error(what), sigma_reached_(sigma_reached) {}
  double sigma_reached() const { return sigma_reached_; }

 private:
  double sigma_reached_;
};

class BracketInvalid : public Error {
 public:
  using Error::Error;
};

class DirectionNotAdversarial : public Error {
 public:
  using Error::Error;
};

class DegenerateEstimate : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// Thrown by batch evaluation; carries the position of the failing element.
class BatchError : public Error {
 public:
  BatchError(std::size_t index, const std::string& what)
      : Error("batch element " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// ---------------------------------------------------------------------------

struct Shape {
  int height = 1;
  int width = 1;
  int channels = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  std::string ToString() const;
  friend bool operator==(const Shape&, const Shape&) = default;

  // (1, d, 1) for flat inputs with no spatial structure.
  static Shape Flat(std::size_t d) { return {1, static_cast<int>(d), 1}; }
};

struct Box {
  double lo = 0.0;
  double hi = 1.0;

  double range() const { return hi - lo; }
  // l2 diameter of [lo, hi]^d.
  double Diameter(std::size_t d) const;
  friend bool operator==(const Box&, const Box&) = default;
};

// A sample in input space. Values are always inside the box: the constructor
// clips, so every Point an attack holds is a valid oracle input.
class Point {
 public:
  Point() = default;
  Point(Vector values, Shape shape, Box box = {});

  const Vector& values() const { return values_; }
  const Shape& shape() const { return shape_; }
  const Box& box() const { return box_; }
  std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
  bool empty() const { return values_.size() == 0; }

  // Same shape and box, new (clipped) values.
  Point WithValues(Vector values) const { return Point(std::move(values), shape_, box_); }
  // this + step * direction, clipped.
  Point Moved(const Vector& direction, double step) const;

  double DistanceTo(const Point& other) const;

 private:
  Vector values_;
  Shape shape_;
  Box box_;
};

Vector Clip(const Vector& values, const Box& box);

// Opaque class identifier. Attacks may only compare labels for equality.
struct Label {
  int id = 0;
  friend bool operator==(const Label&, const Label&) = default;
};

// Decides which side of the boundary a label is on. Non-targeted: anything
// other than the original label is adversarial. Targeted: only the target is.
struct AdversarialCriterion {
  Label original;
  std::optional<Label> target;

  bool IsAdversarial(Label label) const {
    return target ? label == *target : !(label == original);
  }
  bool targeted() const { return target.has_value(); }
};

// (1/d) * ||adversarial - original||^2.
double MeanSquaredPerturbation(const Point& original, const Point& adversarial);

// Median of per-pair MSE. Even counts use the mean of the central pair.
double MedianMse(const std::vector<std::pair<Point, Point>>& pairs);

// Median with the same even-count convention. Throws on empty input.
double Median(std::vector<double> values);

}  // namespace qfool

#endif  // QFOOL_CORE_HPP
