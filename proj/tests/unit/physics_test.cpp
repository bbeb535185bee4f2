#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nlos/common/error.hpp"
#include "nlos/physics/noise.hpp"
#include "nlos/physics/scene.hpp"
#include "nlos/physics/transport.hpp"
#include "support/oracles.hpp"

using namespace nlos;
using namespace nlos::physics;

namespace {

SamplingGeometry small(std::size_t nx, std::size_t nt, std::size_t nz) {
  SamplingGeometry g;
  g.n_x = g.n_y = nx;
  g.n_t = nt;
  g.n_z = nz;
  return g;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Geometry, ValidateRejectsDegenerateValues) {
  SamplingGeometry g;
  EXPECT_NO_THROW(g.validate());
  g.n_t = 0;
  EXPECT_THROW(g.validate(), ParameterError);
  g = SamplingGeometry{};
  g.bin_width = 0.0;
  EXPECT_THROW(g.validate(), ParameterError);
  g = SamplingGeometry{};
  EXPECT_DOUBLE_EQ(g.z_res(), 0.03);
  EXPECT_DOUBLE_EQ(g.z_extent(), 0.96);
}

TEST(Forward, ZeroVolumeGivesZeroHistogram) {
  const SamplingGeometry g = small(4, 16, 8);
  const TransportOperator op(g);
  EXPECT_EQ(op.forward(Tensor(g.volume_shape())), Tensor(g.measurement_shape()));
  EXPECT_EQ(op.adjoint(Tensor(g.measurement_shape())), Tensor(g.volume_shape()));
}

TEST(Forward, SingleScattererBelowScanPoint) {
  const SamplingGeometry g = small(1, 32, 8);
  for (std::size_t w = 0; w < g.n_z; ++w) {
    AlbedoVolume x{Tensor(g.volume_shape()), g};
    x.values.at(0, 0, w) = 0.7;
    const Tensor h = forward_measure(x).histogram;
    const double z0 = g.z_center(w);
    const long bin = std::lround(2.0 * z0 / (g.light_speed * g.bin_width) + 1e-12);
    std::size_t nonzeros = 0;
    for (std::size_t t = 0; t < g.n_t; ++t) nonzeros += h[t] != 0.0;
    EXPECT_EQ(nonzeros, 1u);
    EXPECT_NEAR(h[static_cast<std::size_t>(bin)], 0.7 * g.voxel_volume() / std::pow(z0, 4),
                1e-12 * h[static_cast<std::size_t>(bin)]);
  }
}

TEST(Forward, MatchesDenseMatrix) {
  const SamplingGeometry g = small(4, 20, 8);
  const std::vector<double> a = oracle::dense_transport(g);
  const Tensor x = oracle::random(g.volume_shape(), 21, 0.0, 1.0);
  const Tensor got = TransportOperator(g).forward(x);
  const Tensor want = oracle::apply(a, x, g.measurement_shape());
  double scale = 0.0;
  for (double v : want.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12 * scale);
}

TEST(Forward, IsLinear) {
  const SamplingGeometry g = small(4, 20, 8);
  const TransportOperator op(g);
  const Tensor x1 = oracle::random(g.volume_shape(), 22, 0.0, 1.0);
  const Tensor x2 = oracle::random(g.volume_shape(), 23, 0.0, 1.0);
  Tensor mix(g.volume_shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.3 * x1[i] + 2.5 * x2[i];
  const Tensor y = op.forward(mix), y1 = op.forward(x1), y2 = op.forward(x2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(y[i], 0.3 * y1[i] + 2.5 * y2[i], 1e-12 * (std::abs(y[i]) + 1.0));
  }
}

TEST(Forward, IntensityFallsWithFourthPowerOfDepth) {
  // Doubling dt doubles z_res, so depth index 1 sits at twice the distance.
  SamplingGeometry g1 = small(1, 16, 4);
  SamplingGeometry g2 = g1;
  g2.bin_width *= 2.0;
  auto peak = [](const SamplingGeometry& g) {
    AlbedoVolume x{Tensor(g.volume_shape()), g};
    x.values.at(0, 0, 1) = 1.0;
    return forward_measure(x).histogram.max() / g.voxel_volume();
  };
  EXPECT_NEAR(peak(g2) / peak(g1), std::pow(2.0, -4), 1e-14);
}

TEST(Forward, DropsBinsPastTheEnd) {
  const SamplingGeometry g = small(2, 4, 8);
  AlbedoVolume x{Tensor(g.volume_shape()), g};
  x.values.at(0, 0, 7) = 1.0;
  EXPECT_EQ(forward_measure(x).histogram, Tensor(g.measurement_shape()));
}

TEST(Adjoint, DotProductIdentity) {
  const SamplingGeometry g = small(8, 40, 16);
  const TransportOperator op(g);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const Tensor x = oracle::random(g.volume_shape(), 100 + trial);
    const Tensor y = oracle::random(g.measurement_shape(), 200 + trial);
    const double lhs = dot(op.forward(x), y), rhs = dot(x, op.adjoint(y));
    EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)), 1e-10);
  }
}

TEST(Adjoint, ImpulseLandsOnShell) {
  const SamplingGeometry g = small(4, 20, 8);
  const TransportOperator op(g);
  const std::size_t u = 1, v = 2;
  for (std::size_t bin : {3u, 6u, 9u}) {
    Tensor y(g.measurement_shape());
    y.at(u, v, bin) = 1.0;
    const Tensor back = op.adjoint(y);
    for (std::size_t i = 0; i < g.n_x; ++i)
      for (std::size_t j = 0; j < g.n_y; ++j)
        for (std::size_t w = 0; w < g.n_z; ++w) {
          const bool on_shell =
              oracle::time_bin(oracle::distance(g, u, v, i, j, w), g) == static_cast<long>(bin);
          EXPECT_EQ(back.at(i, j, w) != 0.0, on_shell) << i << "," << j << "," << w;
        }
  }
}

TEST(Adjoint, PointSourceBackprojectsToItself) {
  const SamplingGeometry g = small(8, 40, 12);
  const TransportOperator op(g);
  for (const auto& [i, j, w] : std::vector<std::array<std::size_t, 3>>{{3, 4, 5}, {4, 4, 8}, {1, 6, 3}}) {
    Tensor x(g.volume_shape());
    x.at(i, j, w) = 1.0;
    const Tensor back = op.adjoint(op.forward(x));
    EXPECT_EQ(back.at(i, j, w), back.max()) << i << "," << j << "," << w;
  }
}

TEST(Noise, ZeroInputZeroDarkCountsStaysZero) {
  const SamplingGeometry g = small(2, 8, 4);
  const TransientMeasurement y{Tensor(g.measurement_shape()), g};
  EXPECT_EQ(add_noise(y, NoiseModel{0.0, 3}).histogram, y.histogram);
}

TEST(Noise, DeterministicPerSeed) {
  const SamplingGeometry g = small(4, 16, 4);
  const TransientMeasurement y{oracle::random(g.measurement_shape(), 30, 0.0, 20.0), g};
  const Tensor a = add_noise(y, NoiseModel{0.5, 9}).histogram;
  EXPECT_EQ(a, add_noise(y, NoiseModel{0.5, 9}).histogram);
  EXPECT_NE(a, add_noise(y, NoiseModel{0.5, 10}).histogram);
  for (double v : a.data()) EXPECT_EQ(v, std::floor(v));
}

TEST(Noise, MonteCarloMean) {
  SamplingGeometry g = small(100, 1, 1);
  const TransientMeasurement y{Tensor(g.measurement_shape(), 4.0), g};
  const Tensor draws = add_noise(y, NoiseModel{1.0, 77}).histogram;
  ASSERT_EQ(draws.size(), 10000u);
  EXPECT_NEAR(draws.sum() / 1e4, 5.0, 0.15);
}

TEST(Rasterize, EmptySceneAndFullVolume) {
  const SamplingGeometry g = small(4, 16, 8);
  EXPECT_EQ(rasterize(SceneSpec{}, g).values, Tensor(g.volume_shape()));
  Primitive full;
  full.hx = full.hy = g.wall_extent / 2.0;
  full.cz = full.hz = g.z_extent() / 2.0;
  EXPECT_EQ(rasterize(SceneSpec{{full}}, g).values, Tensor(g.volume_shape(), 1.0));
}

TEST(Rasterize, BoxMatchesPointMembership) {
  const SamplingGeometry g = small(8, 40, 16);
  Primitive box;
  box.cx = 0.07;
  box.cy = -0.12;
  box.cz = 0.21;
  box.hx = 0.19;
  box.hy = 0.11;
  box.hz = 0.08;
  box.albedo = 0.6;
  const Tensor v = rasterize(SceneSpec{{box}}, g).values;
  std::size_t expected = 0, got = 0;
  for (std::size_t i = 0; i < g.n_x; ++i)
    for (std::size_t j = 0; j < g.n_y; ++j)
      for (std::size_t w = 0; w < g.n_z; ++w) {
        const oracle::Coords p = oracle::voxel_center(g, i, j, w);
        const bool in = std::abs(p.x - box.cx) <= box.hx && std::abs(p.y - box.cy) <= box.hy &&
                        std::abs(p.z - box.cz) <= box.hz;
        expected += in;
        got += v.at(i, j, w) != 0.0;
        EXPECT_EQ(v.at(i, j, w), in ? 0.6 : 0.0);
      }
  EXPECT_EQ(got, expected);
  EXPECT_GT(expected, 0u);
}

TEST(Rasterize, LaterPrimitivesWin) {
  const SamplingGeometry g = small(4, 16, 8);
  Primitive a;
  a.hx = a.hy = 0.5;
  a.cz = a.hz = g.z_extent() / 2.0;
  a.albedo = 0.2;
  Primitive b = a;
  b.albedo = 0.9;
  EXPECT_EQ(rasterize(SceneSpec{{a, b}}, g).values, Tensor(g.volume_shape(), 0.9));
}

TEST(Rasterize, RejectsOutOfVolumePrimitive) {
  const SamplingGeometry g = small(4, 16, 8);
  Primitive p;
  p.cx = 0.6;
  p.hx = p.hy = 0.1;
  p.cz = 0.1;
  p.hz = 0.05;
  EXPECT_THROW(rasterize(SceneSpec{{p}}, g), ParameterError);
}

TEST(Scene, RandomScenesAreValidAndNonEmpty) {
  const SamplingGeometry g = small(16, 64, 32);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const SceneSpec scene = random_scene(rng, g);
    EXPECT_GE(scene.primitives.size(), 1u);
    EXPECT_LE(scene.primitives.size(), 3u);
    EXPECT_NO_THROW(scene.validate(g));
    EXPECT_GT(rasterize(scene, g).values.max(), 0.0);
  }
}
