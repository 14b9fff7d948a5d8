#ifndef QFOOL_SUBSPACE_HPP
#define QFOOL_SUBSPACE_HPP

#include <vector>

#include <Eigen/Core>

#include "qfool/core.hpp"
#include "qfool/random.hpp"

namespace qfool {

// Span of the side x side lowest-frequency 2-D DCT-II atoms on an h x w grid.
//
// By default every spatial atom is copied into all channels and scaled by
// 1/sqrt(c), so the subspace has dimension side^2 whatever the channel count.
// With `per_channel` each (atom, channel) pair is its own basis vector and the
// dimension is side^2 * c.
//
// Coefficient order: k = i * side + j for frequencies (i, j), and
// (i * side + j) * c + channel in per-channel mode. Full-space vectors use the
// HWC layout of Point.
class DctSubspace {
 public:
  DctSubspace(Shape shape, int side, bool per_channel = false);

  const Shape& shape() const { return shape_; }
  int side() const { return side_; }
  bool per_channel() const { return per_channel_; }
  std::size_t dimension() const;       // m
  std::size_t full_dimension() const { return shape_.size(); }

  // S * gamma.
  Vector Lift(const Vector& gamma) const;
  // S^T * v.
  Vector Project(const Vector& v) const;
  // Column k of S.
  Vector Atom(std::size_t k) const;

  // `count` vectors S * gamma_i with gamma_i ~ N(0, I_m), each rescaled to
  // l2 norm `norm` in full space.
  std::vector<Vector> SampleNoise(std::size_t count, double norm, Rng& rng) const;

  // Orthonormal DCT-II rows: entry (k, n) = s_k cos(pi (2n + 1) k / (2N)).
  static Eigen::MatrixXd DctRows(int n, int rows);

 private:
  Shape shape_;
  int side_;
  bool per_channel_;
  Eigen::MatrixXd rows_h_;  // side x h
  Eigen::MatrixXd rows_w_;  // side x w
};

}  // namespace qfool

#endif  // QFOOL_SUBSPACE_HPP
