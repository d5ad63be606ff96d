#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "mfglab/kernels.hpp"

using mfglab::kernels::cplx;

namespace {

std::vector<cplx> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v(n);
  for (auto& z : v) z = {u(rng), u(rng)};
  return v;
}

}  // namespace

TEST_CASE("scalar and avx2 kernels are bit-identical") {
  using namespace mfglab::kernels;
  if (!avx2_available()) {
    MESSAGE("avx2 not available on this host; scalar path only");
    return;
  }
  for (std::size_t n : {1u, 2u, 3u, 7u, 64u, 1001u}) {
    auto x = random_vec(n, 11 + static_cast<unsigned>(n));
    auto y = random_vec(n, 23 + static_cast<unsigned>(n));
    cplx a{0.3, -0.7}, b{-1.1, 0.2};

    auto y1 = y, y2 = y;
    scalar_table.axpy_c(a, x.data(), y1.data(), n);
    avx2_table.axpy_c(a, x.data(), y2.data(), n);
    CHECK(y1 == y2);

    std::vector<cplx> z1(n), z2(n);
    scalar_table.axpby_c(a, x.data(), b, y.data(), z1.data(), n);
    avx2_table.axpby_c(a, x.data(), b, y.data(), z2.data(), n);
    CHECK(z1 == z2);

    scalar_table.hadamard_c(x.data(), y.data(), z1.data(), n);
    avx2_table.hadamard_c(x.data(), y.data(), z2.data(), n);
    CHECK(z1 == z2);

    scalar_table.scale_c(a, x.data(), z1.data(), n);
    avx2_table.scale_c(a, x.data(), z2.data(), n);
    CHECK(z1 == z2);

    CHECK(scalar_table.dot_bilinear(x.data(), y.data(), n) ==
          avx2_table.dot_bilinear(x.data(), y.data(), n));
    CHECK(scalar_table.norm2_sq(x.data(), n) == avx2_table.norm2_sq(x.data(), n));
  }
}

TEST_CASE("kernel arithmetic is correct against naive loops") {
  using namespace mfglab::kernels;
  std::size_t n = 257;
  auto x = random_vec(n, 5), y = random_vec(n, 6);
  cplx a{1.5, -0.25};

  auto y1 = y;
  active().axpy_c(a, x.data(), y1.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(std::abs(y1[i] - (y[i] + a * x[i])) < 1e-14);

  cplx d = active().dot_bilinear(x.data(), y.data(), n);
  cplx dn = 0.0;
  for (std::size_t i = 0; i < n; ++i) dn += x[i] * y[i];
  CHECK(std::abs(d - dn) < 1e-12);

  double s = active().norm2_sq(x.data(), n);
  double sn = 0.0;
  for (auto& z : x) sn += std::norm(z);
  CHECK(s == doctest::Approx(sn).epsilon(1e-13));
}
