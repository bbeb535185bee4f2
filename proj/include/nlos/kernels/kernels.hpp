#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Inner-loop kernels shared by the tensor ops and the transport operator.
// Every kernel has a scalar reference and, on x86-64, an AVX2 variant picked
// at runtime. Elementwise kernels (axpy, mul_add, gather_axpy, scatter_axpy)
// are bit-identical across backends; dot differs only in summation order.

namespace nlos::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] += a[i] * b[i]
  void (*mul_add)(const double* a, const double* b, double* y, std::size_t n);
  // dst[i] += weight[i] * src[index[i]]
  void (*gather_axpy)(const double* src, const std::int32_t* index, const double* weight,
                      double* dst, std::size_t n);
  // dst[index[i]] += weight[i] * src[i], applied in increasing i
  void (*scatter_axpy)(const double* src, const std::int32_t* index, const double* weight,
                       double* dst, std::size_t n);
};

bool backend_supported(Backend b) noexcept;
std::string_view backend_name(Backend b) noexcept;

/// Kernel table for a specific backend. Throws ParameterError if unsupported.
const KernelTable& table(Backend b);

/// Backend used by the free functions below. Defaults to the best supported
/// one; NLOS_KERNELS=scalar in the environment forces the reference path.
Backend active_backend() noexcept;
void set_backend(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void mul_add(std::span<const double> a, std::span<const double> b, std::span<double> y);
void gather_axpy(std::span<const double> src, std::span<const std::int32_t> index,
                 std::span<const double> weight, std::span<double> dst);
void scatter_axpy(std::span<const double> src, std::span<const std::int32_t> index,
                  std::span<const double> weight, std::span<double> dst);

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(NLOS_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
}  // namespace detail

}  // namespace nlos::kernels
