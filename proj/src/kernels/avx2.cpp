#include <immintrin.h>

#include "nlos/kernels/kernels.hpp"

// Compiled with -mavx2 and only entered after a runtime CPU check. No FMA:
// mul followed by add rounds exactly like the scalar reference.

namespace nlos::kernels::detail {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_add_avx2(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

void gather_axpy_avx2(const double* src, const std::int32_t* index, const double* weight,
                      double* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(index + i));
    const __m256d vs = _mm256_i32gather_pd(src, vi, 8);
    __m256d vd = _mm256_loadu_pd(dst + i);
    vd = _mm256_add_pd(vd, _mm256_mul_pd(_mm256_loadu_pd(weight + i), vs));
    _mm256_storeu_pd(dst + i, vd);
  }
  for (; i < n; ++i) dst[i] += weight[i] * src[index[i]];
}

// No scatter in AVX2: products are vectorized, the accumulation stays in order
// so repeated indices behave exactly like the scalar loop.
void scatter_axpy_avx2(const double* src, const std::int32_t* index, const double* weight,
                       double* dst, std::size_t n) {
  alignas(32) double prod[4];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_store_pd(prod, _mm256_mul_pd(_mm256_loadu_pd(weight + i), _mm256_loadu_pd(src + i)));
    dst[index[i]] += prod[0];
    dst[index[i + 1]] += prod[1];
    dst[index[i + 2]] += prod[2];
    dst[index[i + 3]] += prod[3];
  }
  for (; i < n; ++i) dst[index[i]] += weight[i] * src[i];
}

}  // namespace

const KernelTable& avx2_table() noexcept {
  static const KernelTable t{Backend::kAvx2, dot_avx2,         axpy_avx2,
                             mul_add_avx2,   gather_axpy_avx2, scatter_axpy_avx2};
  return t;
}

}  // namespace nlos::kernels::detail
