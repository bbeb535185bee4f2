#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "nlos/common/error.hpp"
#include "nlos/kernels/kernels.hpp"
#include "support/oracles.hpp"

using namespace nlos;
using kernels::Backend;

namespace {

std::vector<double> values(std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  const Tensor t = oracle::random({n}, seed);
  return {t.data().begin(), t.data().end()};
}

std::vector<std::int32_t> indices(std::size_t n, std::size_t range, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int32_t> idx(n);
  for (auto& i : idx) i = static_cast<std::int32_t>(rng() % range);
  return idx;
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!kernels::backend_supported(Backend::kAvx2)) GTEST_SKIP() << "no AVX2 on this host";
  }
  const kernels::KernelTable& s = kernels::table(Backend::kScalar);
};

}  // namespace

TEST(Kernels, ScalarAlwaysSupported) {
  EXPECT_TRUE(kernels::backend_supported(Backend::kScalar));
  EXPECT_EQ(kernels::backend_name(Backend::kScalar), "scalar");
  EXPECT_EQ(kernels::table(Backend::kScalar).backend, Backend::kScalar);
}

TEST(Kernels, SetBackendRoundTrip) {
  const Backend before = kernels::active_backend();
  kernels::set_backend(Backend::kScalar);
  EXPECT_EQ(kernels::active_backend(), Backend::kScalar);
  kernels::set_backend(before);
  EXPECT_EQ(kernels::active_backend(), before);
}

TEST(Kernels, SpanWrappersCheckLengths) {
  std::vector<double> a(4), b(5);
  EXPECT_THROW(kernels::dot(a, b), DimensionError);
  EXPECT_THROW(kernels::axpy(1.0, a, b), DimensionError);
}

TEST(Kernels, ScalarReferenceValues) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  EXPECT_DOUBLE_EQ(kernels::table(Backend::kScalar).dot(a.data(), b.data(), 3), 32.0);
  std::vector<double> y{1, 1, 1};
  kernels::table(Backend::kScalar).axpy(2.0, a.data(), y.data(), 3);
  EXPECT_EQ(y, (std::vector<double>{3, 5, 7}));
  std::vector<double> dst(3, 0.0);
  const std::vector<std::int32_t> idx{2, 2, 0};
  kernels::table(Backend::kScalar).scatter_axpy(a.data(), idx.data(), b.data(), dst.data(), 3);
  EXPECT_EQ(dst, (std::vector<double>{18, 0, 14}));
}

#if defined(NLOS_HAVE_AVX2)

TEST_P(KernelEquivalence, ElementwiseKernelsAreBitIdentical) {
  const std::size_t n = GetParam();
  const kernels::KernelTable& avx = kernels::table(Backend::kAvx2);
  const auto a = values(n, 1), b = values(n, 2), y0 = values(n, 3);

  auto y1 = y0, y2 = y0;
  s.axpy(0.37, a.data(), y1.data(), n);
  avx.axpy(0.37, a.data(), y2.data(), n);
  EXPECT_EQ(y1, y2);

  y1 = y0;
  y2 = y0;
  s.mul_add(a.data(), b.data(), y1.data(), n);
  avx.mul_add(a.data(), b.data(), y2.data(), n);
  EXPECT_EQ(y1, y2);

  const auto src = values(97, 4);
  const auto idx = indices(n, 97, 5);
  y1 = y0;
  y2 = y0;
  s.gather_axpy(src.data(), idx.data(), b.data(), y1.data(), n);
  avx.gather_axpy(src.data(), idx.data(), b.data(), y2.data(), n);
  EXPECT_EQ(y1, y2);

  // Repeated targets must accumulate in index order on both paths.
  const auto tgt = indices(n, 7, 6);
  std::vector<double> d1(7, 0.5), d2(7, 0.5);
  s.scatter_axpy(a.data(), tgt.data(), b.data(), d1.data(), n);
  avx.scatter_axpy(a.data(), tgt.data(), b.data(), d2.data(), n);
  EXPECT_EQ(d1, d2);
}

TEST_P(KernelEquivalence, DotAgreesToRounding) {
  const std::size_t n = GetParam();
  const auto a = values(n, 7), b = values(n, 8);
  const double ref = s.dot(a.data(), b.data(), n);
  const double got = kernels::table(Backend::kAvx2).dot(a.data(), b.data(), n);
  double mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
  EXPECT_LE(std::abs(ref - got), 1e-14 * (mag + 1.0));
}

INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalence,
                         ::testing::Values(0, 1, 3, 4, 5, 7, 8, 9, 16, 31, 64, 1000, 4099));

#endif
