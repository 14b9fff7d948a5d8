// Reference geometry and instance generators shared by the unit tests and the
// acceptance binary. Nothing here calls into the attack code paths it checks.

#ifndef QFOOL_TESTS_SUPPORT_HPP
#define QFOOL_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qfool/core.hpp"
#include "qfool/oracle.hpp"
#include "qfool/random.hpp"

namespace qfool::testing {

// |w.x - b| / ||w||.
inline double HyperplaneDistance(const Vector& w, double b, const Vector& x) {
  return std::abs(w.dot(x) - b) / w.norm();
}

// Halfspaces a_i . x + c_i >= 0.
struct Halfspace {
  Vector a;
  double c = 0.0;
};

// Region where class t scores at least as high as every other class.
inline std::vector<Halfspace> ClassRegion(const Eigen::MatrixXd& W, const Vector& b, int t) {
  std::vector<Halfspace> out;
  for (int k = 0; k < W.rows(); ++k) {
    if (k == t) continue;
    out.push_back({(W.row(t) - W.row(k)).transpose(), b[t] - b[k]});
  }
  return out;
}

// Exact distance from x0 to the intersection of two halfspaces, by
// enumerating active sets (none, one, both) and keeping the feasible ones.
inline double TwoHalfspaceDistance(const std::vector<Halfspace>& h, const Vector& x0) {
  const auto feasible = [&](const Vector& x) {
    for (const auto& s : h) {
      if (s.a.dot(x) + s.c < -1e-10 * s.a.norm()) return false;
    }
    return true;
  };
  if (feasible(x0)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : h) {
    const double g = s.a.dot(x0) + s.c;
    const Vector x = x0 + std::max(0.0, -g) / s.a.squaredNorm() * s.a;
    if (feasible(x)) best = std::min(best, (x - x0).norm());
  }
  Eigen::Matrix2d gram;
  gram << h[0].a.dot(h[0].a), h[0].a.dot(h[1].a), h[1].a.dot(h[0].a), h[1].a.dot(h[1].a);
  const Eigen::Vector2d rhs(-(h[0].a.dot(x0) + h[0].c), -(h[1].a.dot(x0) + h[1].c));
  const Eigen::Vector2d lambda = gram.fullPivLu().solve(rhs);
  if (lambda[0] >= 0.0 && lambda[1] >= 0.0) {
    const Vector x = x0 + lambda[0] * h[0].a + lambda[1] * h[1].a;
    best = std::min(best, (x - x0).norm());
  }
  return best;
}

// Dykstra's alternating projections onto an intersection of halfspaces.
inline Vector DykstraProjection(const std::vector<Halfspace>& h, const Vector& x0,
                                int sweeps = 20000) {
  Vector x = x0;
  std::vector<Vector> corrections(h.size(), Vector::Zero(x0.size()));
  for (int it = 0; it < sweeps; ++it) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      const Vector y = x + corrections[i];
      const double g = h[i].a.dot(y) + h[i].c;
      const Vector projected = g >= 0.0 ? y : Vector(y - g / h[i].a.squaredNorm() * h[i].a);
      corrections[i] = y - projected;
      x = projected;
    }
  }
  return x;
}

// Binary affine instance: x0 in the interior, boundary at distance `distance`
// on the +w side.
struct BinaryInstance {
  Vector w;
  double offset = 0.0;
  Vector x0;
  double distance = 0.0;
};

inline BinaryInstance MakeBinaryInstance(std::uint64_t seed, std::size_t d) {
  Rng rng = MakeRng(seed, 77);
  BinaryInstance inst;
  inst.w = GaussianVector(rng, d);
  std::uniform_real_distribution<double> coord(0.3, 0.7);
  std::uniform_real_distribution<double> gap(0.05, 0.3);
  inst.x0.resize(static_cast<Eigen::Index>(d));
  for (auto& v : inst.x0) v = coord(rng);
  inst.distance = gap(rng);
  inst.offset = inst.w.dot(inst.x0) + inst.distance * inst.w.norm();
  return inst;
}

// Three-class affine instance with x0 in class 0, a target t in {1, 2} and a
// uniformly drawn anchor labelled t.
struct TargetedInstance {
  Eigen::MatrixXd W;
  Vector b;
  Vector x0;
  Vector anchor;
  int target = 1;
};

inline TargetedInstance MakeTargetedInstance(std::uint64_t seed, std::size_t d) {
  Rng rng = MakeRng(seed, 5);
  std::uniform_real_distribution<double> coord(0.3, 0.7), margin(0.5, 2.0), unit(0.0, 1.0);
  TargetedInstance inst;
  inst.W.resize(3, static_cast<Eigen::Index>(d));
  for (int i = 0; i < 3; ++i) inst.W.row(i) = GaussianVector(rng, d).transpose();
  inst.x0.resize(static_cast<Eigen::Index>(d));
  for (auto& v : inst.x0) v = coord(rng);
  inst.b = -inst.W * inst.x0;
  inst.b[0] += margin(rng);
  inst.target = 1 + static_cast<int>(seed % 2);
  inst.anchor.resize(static_cast<Eigen::Index>(d));
  for (;;) {
    for (auto& v : inst.anchor) v = unit(rng);
    const Vector scores = inst.W * inst.anchor + inst.b;
    Eigen::Index best = 0;
    scores.maxCoeff(&best);
    if (best == inst.target) break;
  }
  return inst;
}

// Gram-free cosine.
inline double Cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

inline std::filesystem::path FreshDirectory(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("qfool-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Classifies everything as `label`.
class ConstantOracle : public DecisionOracle {
 public:
  ConstantOracle(std::size_t dimension, int label) : dimension_(dimension), label_(label) {}
  std::size_t dimension() const override { return dimension_; }

 protected:
  Label ClassifyOne(const Point&) const override { return Label{label_}; }

 private:
  std::size_t dimension_;
  int label_;
};

}  // namespace qfool::testing

#endif  // QFOOL_TESTS_SUPPORT_HPP
