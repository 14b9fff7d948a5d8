#include "qfool/synthetic.hpp"

#include <cmath>

#include "qfool/random.hpp"

namespace qfool {

std::vector<DenseLayer> RandomReluNetwork(const std::vector<int>& sizes, std::uint64_t seed,
                                          double center) {
  if (sizes.size() < 2) throw ContractViolation("network needs an input and an output width");
  for (int s : sizes) {
    if (s < 1) throw ContractViolation("layer widths must be positive");
  }
  Rng rng = MakeRng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int in = sizes[k];
    const int out = sizes[k + 1];
    const double scale = std::sqrt(2.0 / in);
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = scale * normal(rng);
    }
    Vector b(out);
    if (k == 0) {
      b = -w * Vector::Constant(in, center);
    } else {
      for (int r = 0; r < out; ++r) b[r] = 0.1 * normal(rng);
    }
    layers.push_back({std::move(w), std::move(b)});
  }
  return layers;
}

DenseLayer RandomAffineLayer(int classes, int dimension, std::uint64_t seed, double center) {
  if (classes < 2 || dimension < 1) throw ContractViolation("need >= 2 classes and dimension >= 1");
  Rng rng = MakeRng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(classes, dimension);
  for (int r = 0; r < classes; ++r) {
    for (int c = 0; c < dimension; ++c) w(r, c) = normal(rng);
  }
  Vector b = -w * Vector::Constant(dimension, center);
  return {std::move(w), std::move(b)};
}

}  // namespace qfool
