#pragma once

#include <cstdint>

#include "jcas/experiments/training.hpp"

namespace jcas::experiments {

// Class k lights a Doppler band of its own (rows [k * B / N, (k + 1) * B / N))
// over random time columns, on top of uniform noise; maps are scaled to a
// maximum of 1. A linear read-out of the band means separates the classes.
TensorSet banded_set(std::size_t n, std::size_t classes, std::size_t b, std::size_t t, std::size_t a,
                     std::uint64_t seed);

// Two classes built from pairs of dots `gap` Doppler rows apart. Class 0
// places both dots of a pair in the same column, class 1 shifts the second
// dot by one column. Single dots look the same in both classes, so after a
// stride-2 pooling only a first-layer kernel taller than the gap keeps the
// difference.
TensorSet dot_pair_set(std::size_t n, std::size_t b, std::size_t t, std::size_t gap, std::size_t pairs,
                       std::uint64_t seed);

}  // namespace jcas::experiments
