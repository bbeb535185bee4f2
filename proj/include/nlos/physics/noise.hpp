#pragma once

#include <cstdint>

#include "nlos/physics/geometry.hpp"

namespace nlos::physics {

struct NoiseModel {
  double dark_count_rate = 0.0;  // expected background counts per bin
  std::uint64_t seed = 0;
};

/// Replaces every bin by a Poisson draw with mean (bin + dark_count_rate).
/// Each bin uses its own generator seeded with derive_seed(seed, flat_index),
/// so the result depends only on (input, model).
TransientMeasurement add_noise(const TransientMeasurement& y, const NoiseModel& model);

}  // namespace nlos::physics
