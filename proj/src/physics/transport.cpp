#include "nlos/physics/transport.hpp"

#include <cmath>
#include <cstdlib>

#include "nlos/common/error.hpp"
#include "nlos/kernels/kernels.hpp"

namespace nlos::physics {

TransportOperator::TransportOperator(const SamplingGeometry& geometry) : geometry_(geometry) {
  geometry_.validate();
  const std::size_t n = geometry_.n_x * geometry_.n_y * geometry_.n_z;
  bins_.assign(n, 0);
  weights_.assign(n, 0.0);
  kept_.assign(n, false);

  const double zr = geometry_.z_res();
  const double px = geometry_.pitch_x(), py = geometry_.pitch_y();
  const double dv = geometry_.voxel_volume();
  for (std::size_t di = 0; di < geometry_.n_x; ++di) {
    for (std::size_t dj = 0; dj < geometry_.n_y; ++dj) {
      for (std::size_t w = 0; w < geometry_.n_z; ++w) {
        const double dx = static_cast<double>(di) * px;
        const double dy = static_cast<double>(dj) * py;
        const double z = geometry_.z_center(w);
        const double r2 = dx * dx + dy * dy + z * z;
        // 2r / (c dt) == r / z_res; evaluated in bin units so that an
        // on-axis voxel lands on exactly w + 0.5.
        const double ax = dx / zr, ay = dy / zr, az = static_cast<double>(w) + 0.5;
        const double t = std::sqrt(ax * ax + ay * ay + az * az);
        const double b = std::floor(t + 0.5);
        const std::size_t e = offset(di, dj) + w;
        if (b < static_cast<double>(geometry_.n_t)) {
          bins_[e] = static_cast<std::int32_t>(b);
          weights_[e] = dv / (r2 * r2);
          kept_[e] = true;
        }
      }
    }
  }
}

std::int32_t TransportOperator::bin(std::size_t di, std::size_t dj, std::size_t w) const {
  const std::size_t e = offset(di, dj) + w;
  return kept_.at(e) ? bins_[e] : -1;
}

double TransportOperator::weight(std::size_t di, std::size_t dj, std::size_t w) const {
  return weights_.at(offset(di, dj) + w);
}

namespace {
std::size_t absdiff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }
}  // namespace

Tensor TransportOperator::forward(const Tensor& volume) const {
  const auto& g = geometry_;
  if (volume.shape() != g.volume_shape()) {
    throw DimensionError("forward: volume shape " + shape_string(volume.shape()) +
                         " does not match geometry " + shape_string(g.volume_shape()));
  }
  const auto& kt = kernels::table(kernels::active_backend());
  Tensor hist(g.measurement_shape());
  for (std::size_t i = 0; i < g.n_x; ++i) {
    for (std::size_t j = 0; j < g.n_y; ++j) {
      double* row = hist.data().data() + (i * g.n_y + j) * g.n_t;
      for (std::size_t u = 0; u < g.n_x; ++u) {
        for (std::size_t v = 0; v < g.n_y; ++v) {
          const std::size_t o = offset(absdiff(u, i), absdiff(v, j));
          kt.scatter_axpy(volume.data().data() + (u * g.n_y + v) * g.n_z, bins_.data() + o,
                          weights_.data() + o, row, g.n_z);
        }
      }
    }
  }
  return hist;
}

Tensor TransportOperator::adjoint(const Tensor& histogram) const {
  const auto& g = geometry_;
  if (histogram.shape() != g.measurement_shape()) {
    throw DimensionError("adjoint: histogram shape " + shape_string(histogram.shape()) +
                         " does not match geometry " + shape_string(g.measurement_shape()));
  }
  const auto& kt = kernels::table(kernels::active_backend());
  Tensor vol(g.volume_shape());
  for (std::size_t u = 0; u < g.n_x; ++u) {
    for (std::size_t v = 0; v < g.n_y; ++v) {
      double* col = vol.data().data() + (u * g.n_y + v) * g.n_z;
      for (std::size_t i = 0; i < g.n_x; ++i) {
        for (std::size_t j = 0; j < g.n_y; ++j) {
          const std::size_t o = offset(absdiff(u, i), absdiff(v, j));
          kt.gather_axpy(histogram.data().data() + (i * g.n_y + j) * g.n_t, bins_.data() + o,
                         weights_.data() + o, col, g.n_z);
        }
      }
    }
  }
  return vol;
}

TransientMeasurement TransportOperator::forward(const AlbedoVolume& x) const {
  if (!(x.geometry == geometry_)) throw ParameterError("forward: geometry mismatch");
  return TransientMeasurement{forward(x.values), geometry_};
}

Tensor TransportOperator::adjoint(const TransientMeasurement& y) const {
  if (!(y.geometry == geometry_)) throw ParameterError("adjoint: geometry mismatch");
  return adjoint(y.histogram);
}

TransientMeasurement forward_measure(const AlbedoVolume& x) {
  return TransportOperator(x.geometry).forward(x);
}

Tensor adjoint_backproject(const TransientMeasurement& y) {
  return TransportOperator(y.geometry).adjoint(y);
}

}  // namespace nlos::physics
