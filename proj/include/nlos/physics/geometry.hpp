#pragma once

#include <cstddef>

#include "nlos/tensor/tensor.hpp"

namespace nlos::physics {

/// Confocal acquisition layout. The relay wall is the plane z = 0, the scan
/// grid and the lateral voxel grid share the same n_x x n_y cell-centred
/// layout over a square of side `wall_extent` centred at the origin, and
/// depth cells are centred at (w + 0.5) * z_res for w in [0, n_z).
struct SamplingGeometry {
  std::size_t n_x = 16;
  std::size_t n_y = 16;
  std::size_t n_t = 64;
  std::size_t n_z = 32;
  double wall_extent = 1.0;   // metres
  double bin_width = 2e-10;   // seconds
  double light_speed = 3e8;   // metres / second

  /// Depth of one bin for a confocal round trip: c * dt / 2.
  double z_res() const noexcept { return light_speed * bin_width / 2.0; }
  double z_extent() const noexcept { return static_cast<double>(n_z) * z_res(); }
  double pitch_x() const noexcept { return wall_extent / static_cast<double>(n_x); }
  double pitch_y() const noexcept { return wall_extent / static_cast<double>(n_y); }
  double voxel_volume() const noexcept { return pitch_x() * pitch_y() * z_res(); }

  double x_center(std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * pitch_x() - wall_extent / 2.0;
  }
  double y_center(std::size_t j) const noexcept {
    return (static_cast<double>(j) + 0.5) * pitch_y() - wall_extent / 2.0;
  }
  double z_center(std::size_t w) const noexcept { return (static_cast<double>(w) + 0.5) * z_res(); }

  Shape volume_shape() const { return {n_x, n_y, n_z}; }
  Shape measurement_shape() const { return {n_x, n_y, n_t}; }

  /// Throws ParameterError on zero counts or non-positive extents.
  void validate() const;

  friend bool operator==(const SamplingGeometry&, const SamplingGeometry&) = default;
};

/// Hidden-scene albedo, [n_x x n_y x n_z], non-negative.
struct AlbedoVolume {
  Tensor values;
  SamplingGeometry geometry;

  void validate() const;
};

/// Photon histogram, [n_x x n_y x n_t], non-negative.
struct TransientMeasurement {
  Tensor histogram;
  SamplingGeometry geometry;

  void validate() const;
};

}  // namespace nlos::physics
