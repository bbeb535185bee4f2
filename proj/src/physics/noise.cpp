#include "nlos/physics/noise.hpp"

#include <random>

#include "nlos/common/error.hpp"
#include "nlos/common/rng.hpp"

namespace nlos::physics {

TransientMeasurement add_noise(const TransientMeasurement& y, const NoiseModel& model) {
  if (!(model.dark_count_rate >= 0.0)) {
    throw ParameterError("noise: dark_count_rate must be >= 0");
  }
  y.validate();
  TransientMeasurement out = y;
  auto data = out.histogram.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double mean = data[i] + model.dark_count_rate;
    if (mean <= 0.0) {
      data[i] = 0.0;
      continue;
    }
    Rng rng(derive_seed(model.seed, i));
    std::poisson_distribution<std::int64_t> draw(mean);
    data[i] = static_cast<double>(draw(rng));
  }
  return out;
}

}  // namespace nlos::physics
