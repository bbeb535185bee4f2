#include "nlos/kernels/kernels.hpp"

namespace nlos::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_add_scalar(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void gather_axpy_scalar(const double* src, const std::int32_t* index, const double* weight,
                        double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += weight[i] * src[index[i]];
}

void scatter_axpy_scalar(const double* src, const std::int32_t* index, const double* weight,
                         double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[index[i]] += weight[i] * src[i];
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable t{Backend::kScalar, dot_scalar,         axpy_scalar,
                             mul_add_scalar,   gather_axpy_scalar, scatter_axpy_scalar};
  return t;
}

}  // namespace nlos::kernels::detail
