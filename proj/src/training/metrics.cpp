#include "nlos/training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlos/common/error.hpp"

namespace nlos::training {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

double mse(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size * size);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) - c, dx = static_cast<double>(j) - c;
      w[i * size + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += w[i * size + j];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double data_range) {
  require_same(a, b, "psnr");
  if (!(data_range > 0.0)) throw ParameterError("psnr: data range must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / m));
}

double ssim(const Tensor& a, const Tensor& b, double data_range) {
  require_same(a, b, "ssim");
  if (a.rank() != 2) throw DimensionError("ssim: expected [H x W] images");
  const std::size_t h = a.dim(0), w = a.dim(1);
  std::size_t size = std::min<std::size_t>({11, h, w});
  if (size % 2 == 0) --size;
  const std::vector<double> win = gaussian_window(size, 1.5);
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i0 = 0; i0 + size <= h; ++i0) {
    for (std::size_t j0 = 0; j0 + size <= w; ++j0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t u = 0; u < size; ++u) {
        for (std::size_t v = 0; v < size; ++v) {
          const double g = win[u * size + v];
          const double x = a.at(i0 + u, j0 + v), y = b.at(i0 + u, j0 + v);
          mx += g * x;
          my += g * y;
          sxx += g * x * x;
          syy += g * y * y;
          sxy += g * x * y;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double rmse(const Tensor& a, const Tensor& b) {
  require_same(a, b, "rmse");
  return std::sqrt(mse(a, b));
}

double mad(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mad");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Tensor out = x;
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace nlos::training
