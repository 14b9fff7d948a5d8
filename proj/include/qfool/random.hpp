#ifndef QFOOL_RANDOM_HPP
#define QFOOL_RANDOM_HPP

#include <cstdint>
#include <random>

#include "qfool/core.hpp"

namespace qfool {

using Rng = std::mt19937_64;

// Independent stream for a (seed, stream id) pair.
Rng MakeRng(std::uint64_t seed, std::uint64_t stream = 0);

// n i.i.d. N(0, 1) coordinates.
Vector GaussianVector(Rng& rng, std::size_t n);

}  // namespace qfool

#endif  // QFOOL_RANDOM_HPP
