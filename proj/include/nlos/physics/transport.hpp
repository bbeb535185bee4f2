#pragma once

#include <cstdint>
#include <vector>

#include "nlos/physics/geometry.hpp"

namespace nlos::physics {

/// Discrete confocal measurement operator y = A x and its exact transpose.
///
/// For scan point (xi, kappa) and voxel centre (x, y, z) with
/// r = sqrt((x - xi)^2 + (y - kappa)^2 + z^2), the voxel contributes
/// albedo * dV / r^4 to time bin round(2 r / (c dt)). Exact half-bin values
/// round up. Bins at or beyond n_t are dropped.
///
/// The scan and lateral voxel grids coincide, so an entry depends only on
/// (|u - i|, |v - j|, w). Both directions read the same precomputed table,
/// which keeps A and A^T transposes of each other to the last bit.
class TransportOperator {
 public:
  explicit TransportOperator(const SamplingGeometry& geometry);

  const SamplingGeometry& geometry() const noexcept { return geometry_; }

  TransientMeasurement forward(const AlbedoVolume& x) const;
  /// A^T y as an [n_x x n_y x n_z] grid.
  Tensor adjoint(const TransientMeasurement& y) const;

  /// Raw-tensor forms of the two directions.
  Tensor forward(const Tensor& volume) const;
  Tensor adjoint(const Tensor& histogram) const;

  /// Time bin hit by lateral offset (di, dj) at depth index w, or -1 if dropped.
  std::int32_t bin(std::size_t di, std::size_t dj, std::size_t w) const;
  double weight(std::size_t di, std::size_t dj, std::size_t w) const;

 private:
  std::size_t offset(std::size_t di, std::size_t dj) const noexcept {
    return (di * geometry_.n_y + dj) * geometry_.n_z;
  }

  SamplingGeometry geometry_;
  std::vector<std::int32_t> bins_;   // dropped entries: index 0, weight 0
  std::vector<double> weights_;
  std::vector<bool> kept_;
};

TransientMeasurement forward_measure(const AlbedoVolume& x);
Tensor adjoint_backproject(const TransientMeasurement& y);

}  // namespace nlos::physics
