#include "qfool/subspace.hpp"

#include <cmath>
#include <numbers>

namespace qfool {

Eigen::MatrixXd DctSubspace::DctRows(int n, int rows) {
  Eigen::MatrixXd out(rows, n);
  for (int k = 0; k < rows; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i) {
      out(k, i) = scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return out;
}

DctSubspace::DctSubspace(Shape shape, int side, bool per_channel)
    : shape_(shape), side_(side), per_channel_(per_channel) {
  if (shape_.size() == 0) throw ContractViolation("subspace needs a non-empty shape");
  if (side_ < 1) throw ContractViolation("subspace side must be at least 1");
  if (side_ > std::min(shape_.height, shape_.width)) {
    throw ContractViolation("subspace side " + std::to_string(side_) + " exceeds min(h, w) of " +
                            shape_.ToString());
  }
  rows_h_ = DctRows(shape_.height, side_);
  rows_w_ = DctRows(shape_.width, side_);
}

std::size_t DctSubspace::dimension() const {
  const auto m = static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_);
  return per_channel_ ? m * static_cast<std::size_t>(shape_.channels) : m;
}

Vector DctSubspace::Lift(const Vector& gamma) const {
  if (gamma.size() != static_cast<Eigen::Index>(dimension())) {
    throw ContractViolation("coefficient vector has length " + std::to_string(gamma.size()) +
                            ", subspace dimension is " + std::to_string(dimension()));
  }
  const int c = shape_.channels;
  const int w = shape_.width;
  Vector out(static_cast<Eigen::Index>(shape_.size()));
  const int planes = per_channel_ ? c : 1;
  for (int p = 0; p < planes; ++p) {
    Eigen::MatrixXd coeffs(side_, side_);
    for (int i = 0; i < side_; ++i) {
      for (int j = 0; j < side_; ++j) {
        const Eigen::Index k = static_cast<Eigen::Index>(i) * side_ + j;
        coeffs(i, j) = per_channel_ ? gamma[k * c + p] : gamma[k];
      }
    }
    const Eigen::MatrixXd image = rows_h_.transpose() * coeffs * rows_w_;  // h x w
    for (int r = 0; r < shape_.height; ++r) {
      for (int col = 0; col < w; ++col) {
        const Eigen::Index base = (static_cast<Eigen::Index>(r) * w + col) * c;
        if (per_channel_) {
          out[base + p] = image(r, col);
        } else {
          const double value = image(r, col) / std::sqrt(static_cast<double>(c));
          for (int ch = 0; ch < c; ++ch) out[base + ch] = value;
        }
      }
    }
  }
  return out;
}

Vector DctSubspace::Project(const Vector& v) const {
  if (v.size() != static_cast<Eigen::Index>(shape_.size())) {
    throw ContractViolation("vector length does not match the subspace shape");
  }
  const int c = shape_.channels;
  const int w = shape_.width;
  Vector gamma = Vector::Zero(static_cast<Eigen::Index>(dimension()));
  for (int ch = 0; ch < c; ++ch) {
    Eigen::MatrixXd plane(shape_.height, w);
    for (int r = 0; r < shape_.height; ++r) {
      for (int col = 0; col < w; ++col) {
        plane(r, col) = v[(static_cast<Eigen::Index>(r) * w + col) * c + ch];
      }
    }
    const Eigen::MatrixXd coeffs = rows_h_ * plane * rows_w_.transpose();  // side x side
    for (int i = 0; i < side_; ++i) {
      for (int j = 0; j < side_; ++j) {
        const Eigen::Index k = static_cast<Eigen::Index>(i) * side_ + j;
        if (per_channel_) {
          gamma[k * c + ch] = coeffs(i, j);
        } else {
          gamma[k] += coeffs(i, j) / std::sqrt(static_cast<double>(c));
        }
      }
    }
  }
  return gamma;
}

Vector DctSubspace::Atom(std::size_t k) const {
  if (k >= dimension()) throw ContractViolation("atom index out of range");
  Vector gamma = Vector::Zero(static_cast<Eigen::Index>(dimension()));
  gamma[static_cast<Eigen::Index>(k)] = 1.0;
  return Lift(gamma);
}

std::vector<Vector> DctSubspace::SampleNoise(std::size_t count, double norm, Rng& rng) const {
  if (count < 1) throw ContractViolation("sample count must be at least 1");
  if (!(norm > 0.0)) throw ContractViolation("noise norm must be positive");
  std::vector<Vector> out;
  out.reserve(count);
  while (out.size() < count) {
    Vector lifted = Lift(GaussianVector(rng, dimension()));
    const double n = lifted.norm();
    if (n == 0.0) continue;
    out.push_back(lifted * (norm / n));
  }
  return out;
}

}  // namespace qfool
