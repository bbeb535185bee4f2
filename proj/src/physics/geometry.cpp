#include "nlos/physics/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nlos/common/error.hpp"

namespace nlos::physics {

void SamplingGeometry::validate() const {
  if (n_x < 1 || n_y < 1 || n_t < 1 || n_z < 1) {
    throw ParameterError("geometry: all sample counts must be >= 1");
  }
  if (!(wall_extent > 0.0) || !std::isfinite(wall_extent)) {
    throw ParameterError("geometry: wall_extent must be positive");
  }
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw ParameterError("geometry: bin_width must be positive");
  }
  if (!(light_speed > 0.0) || !std::isfinite(light_speed)) {
    throw ParameterError("geometry: light_speed must be positive");
  }
}

namespace {
void check_grid(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(t.shape()) +
                         " does not match geometry " + shape_string(expected));
  }
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
  if (std::any_of(t.data().begin(), t.data().end(), [](double v) { return v < 0.0; })) {
    throw ParameterError(std::string(what) + ": negative value");
  }
}
}  // namespace

void AlbedoVolume::validate() const {
  geometry.validate();
  check_grid(values, geometry.volume_shape(), "albedo volume");
}

void TransientMeasurement::validate() const {
  geometry.validate();
  check_grid(histogram, geometry.measurement_shape(), "transient measurement");
}

}  // namespace nlos::physics
