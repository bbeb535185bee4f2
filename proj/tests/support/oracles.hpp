#pragma once

// Slow, direct reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "nlos/common/rng.hpp"
#include "nlos/physics/geometry.hpp"
#include "nlos/tensor/tensor.hpp"

namespace oracle {

using nlos::Tensor;
using nlos::physics::SamplingGeometry;

inline Tensor random(nlos::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  nlos::Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = nlos::uniform(rng, lo, hi);
  return t;
}

struct Coords {
  double x, y, z;
};

inline Coords voxel_center(const SamplingGeometry& g, std::size_t i, std::size_t j, std::size_t w) {
  const double px = g.wall_extent / static_cast<double>(g.n_x);
  const double py = g.wall_extent / static_cast<double>(g.n_y);
  const double dz = g.light_speed * g.bin_width / 2.0;
  return {-g.wall_extent / 2.0 + (static_cast<double>(i) + 0.5) * px,
          -g.wall_extent / 2.0 + (static_cast<double>(j) + 0.5) * py,
          (static_cast<double>(w) + 0.5) * dz};
}

/// round(2r / (c dt)) with exact halves (up to 1e-9) going up.
inline long time_bin(double r, const SamplingGeometry& g) {
  const double t = 2.0 * r / (g.light_speed * g.bin_width);
  const double base = std::floor(t);
  return static_cast<long>(t - base >= 0.5 - 1e-9 ? base + 1.0 : base);
}

inline double distance(const SamplingGeometry& g, std::size_t u, std::size_t v, std::size_t i,
                       std::size_t j, std::size_t w) {
  const Coords s = voxel_center(g, u, v, 0);
  const Coords p = voxel_center(g, i, j, w);
  return std::sqrt((p.x - s.x) * (p.x - s.x) + (p.y - s.y) * (p.y - s.y) + p.z * p.z);
}

/// Measurement matrix, rows (u, v, t) and columns (i, j, w), both row-major.
inline std::vector<double> dense_transport(const SamplingGeometry& g) {
  const std::size_t rows = g.n_x * g.n_y * g.n_t, cols = g.n_x * g.n_y * g.n_z;
  const double dv = (g.wall_extent / static_cast<double>(g.n_x)) *
                    (g.wall_extent / static_cast<double>(g.n_y)) *
                    (g.light_speed * g.bin_width / 2.0);
  std::vector<double> a(rows * cols, 0.0);
  for (std::size_t u = 0; u < g.n_x; ++u)
    for (std::size_t v = 0; v < g.n_y; ++v)
      for (std::size_t i = 0; i < g.n_x; ++i)
        for (std::size_t j = 0; j < g.n_y; ++j)
          for (std::size_t w = 0; w < g.n_z; ++w) {
            const double r = distance(g, u, v, i, j, w);
            const long t = time_bin(r, g);
            if (t < 0 || static_cast<std::size_t>(t) >= g.n_t) continue;
            const std::size_t row = (u * g.n_y + v) * g.n_t + static_cast<std::size_t>(t);
            const std::size_t col = (i * g.n_y + j) * g.n_z + w;
            a[row * cols + col] += dv / (r * r * r * r);
          }
  return a;
}

inline Tensor apply(const std::vector<double>& a, const Tensor& x, const nlos::Shape& out_shape) {
  Tensor y(out_shape);
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c] * x[c];
    y[r] = s;
  }
  return y;
}

/// k nearest rows of an [N x D] matrix by full sort, ties to the lower index.
inline std::vector<std::size_t> brute_knn(const Tensor& x, std::size_t k) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (x.at(i, c) - x.at(j, c)) * (x.at(i, c) - x.at(j, c));
      all.emplace_back(std::sqrt(s), j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t m = 0; m < k; ++m) out.push_back(all[m].second);
  }
  return out;
}

inline double row_distance(const Tensor& x, std::size_t row, const Tensor& v) {
  double s = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) s += (x.at(row, c) - v[c]) * (x.at(row, c) - v[c]);
  return std::sqrt(s);
}

/// Per-pixel argmax over axis 0 of a [Z x H x W] tensor by linear scan.
inline std::vector<std::size_t> scan_argmax(const Tensor& v) {
  const std::size_t z = v.dim(0), h = v.dim(1), w = v.dim(2);
  std::vector<std::size_t> out(h * w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < z; ++k)
        if (v.at(k, i, j) > v.at(best, i, j)) best = k;
      out[i * w + j] = best;
    }
  return out;
}

/// Direct SSIM: Gaussian-weighted moments per valid window, averaged.
inline double ssim(const Tensor& a, const Tensor& b, std::size_t win = 11, double sigma = 1.5) {
  const std::size_t h = a.dim(0), w = a.dim(1);
  std::vector<double> g(win * win);
  double tot = 0.0;
  const double c = static_cast<double>(win - 1) / 2.0;
  for (std::size_t i = 0; i < win; ++i)
    for (std::size_t j = 0; j < win; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      g[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      tot += g[i * win + j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i0 = 0; i0 + win <= h; ++i0)
    for (std::size_t j0 = 0; j0 + win <= w; ++j0) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = g[i * win + j] / tot;
          ma += wt * a.at(i0 + i, j0 + j);
          mb += wt * b.at(i0 + i, j0 + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = g[i * win + j] / tot;
          const double da = a.at(i0 + i, j0 + j) - ma, db = b.at(i0 + i, j0 + j) - mb;
          va += wt * da * da;
          vb += wt * db * db;
          cov += wt * da * db;
        }
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return sum / static_cast<double>(n);
}

}  // namespace oracle
