#include <atomic>
#include <cstdlib>
#include <string>

#include "nlos/common/error.hpp"
#include "nlos/kernels/kernels.hpp"

namespace nlos::kernels {
namespace {

Backend pick_default() noexcept {
  if (const char* env = std::getenv("NLOS_KERNELS"); env != nullptr) {
    if (std::string(env) == "scalar") return Backend::kScalar;
  }
  return backend_supported(Backend::kAvx2) ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> t{&table(pick_default())};
  return t;
}

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

}  // namespace

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(NLOS_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& table(Backend b) {
  if (!backend_supported(b)) {
    throw ParameterError("kernel backend not supported on this CPU: " +
                         std::string(backend_name(b)));
  }
#if defined(NLOS_HAVE_AVX2)
  if (b == Backend::kAvx2) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

Backend active_backend() noexcept { return current().load()->backend; }

void set_backend(Backend b) { current().store(&table(b)); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size(), "dot");
  return current().load()->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same(x.size(), y.size(), "axpy");
  current().load()->axpy(alpha, x.data(), y.data(), x.size());
}

void mul_add(std::span<const double> a, std::span<const double> b, std::span<double> y) {
  check_same(a.size(), b.size(), "mul_add");
  check_same(a.size(), y.size(), "mul_add");
  current().load()->mul_add(a.data(), b.data(), y.data(), y.size());
}

void gather_axpy(std::span<const double> src, std::span<const std::int32_t> index,
                 std::span<const double> weight, std::span<double> dst) {
  check_same(index.size(), dst.size(), "gather_axpy");
  check_same(weight.size(), dst.size(), "gather_axpy");
  current().load()->gather_axpy(src.data(), index.data(), weight.data(), dst.data(), dst.size());
}

void scatter_axpy(std::span<const double> src, std::span<const std::int32_t> index,
                  std::span<const double> weight, std::span<double> dst) {
  check_same(index.size(), src.size(), "scatter_axpy");
  check_same(weight.size(), src.size(), "scatter_axpy");
  current().load()->scatter_axpy(src.data(), index.data(), weight.data(), dst.data(), src.size());
}

}  // namespace nlos::kernels
