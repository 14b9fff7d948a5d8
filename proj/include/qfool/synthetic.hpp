#ifndef QFOOL_SYNTHETIC_HPP
#define QFOOL_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "qfool/oracle.hpp"

namespace qfool {

// ReLU network with layer widths `sizes` (input first). Weights are
// N(0, 2 / fan_in); the first layer's bias is -W1 * center so hidden units
// straddle zero around inputs near `center`; later biases are N(0, 0.1^2).
std::vector<DenseLayer> RandomReluNetwork(const std::vector<int>& sizes, std::uint64_t seed,
                                          double center = 0.5);

// Single affine layer with N(0, 1) weights and biases chosen so the point
// `center` * 1 scores equally for every class.
DenseLayer RandomAffineLayer(int classes, int dimension, std::uint64_t seed, double center = 0.5);

}  // namespace qfool

#endif  // QFOOL_SYNTHETIC_HPP
