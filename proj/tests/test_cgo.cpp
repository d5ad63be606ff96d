#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mfglab/cgo.hpp"
#include "mfglab/linearize.hpp"

using namespace mfglab;
namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("null frequency pairs satisfy the three algebraic identities") {
  for (auto k : std::vector<std::array<int, 3>>{{1, 0, 0}, {2, -1, 3}, {0, 0, 5}}) {
    for (double R : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      auto p = build_xi_pair(k, R);
      CHECK(std::abs(cdot(p.xi1, p.xi1)) < 1e-12 * (1 + R * R));
      CHECK(std::abs(cdot(p.xi2, p.xi2)) < 1e-12 * (1 + R * R));
      for (int a = 0; a < 3; ++a)
        CHECK(std::abs(p.xi1[a] + p.xi2[a] - cplx(0, k[a])) < 1e-13);
      double kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
      CVec3 c1 = {std::conj(p.xi1[0]), std::conj(p.xi1[1]), std::conj(p.xi1[2])};
      double want = 0.25 * kk + 4 * R * R * kk;
      CHECK(std::real(cdot(p.xi1, c1)) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS(build_xi_pair({0, 0, 0}, 2.0));
  CHECK_THROWS(build_xi_pair({1, 0, 0}, 0.1));
}

TEST_CASE("zero potential gives zero omega") {
  auto g = SpatialGrid::torus(3, 8);
  Field H(g, 0.0);
  auto p = build_xi_pair({1, 0, 0}, 2.0);
  auto sol = solve_omega(H, p.xi1);
  CHECK(sol.converged);
  CHECK(sol.omega.max_abs() == 0.0);
}

TEST_CASE("omega norm scales like 1/|xi| along a dyadic ladder") {
  auto g = SpatialGrid::torus(3, 16);
  Field H = sample(g, [](double x, double y, double z) {
    return 0.8 * std::cos(2 * pi * x) * std::cos(2 * pi * y) +
           0.4 * std::sin(2 * pi * z);
  });
  // k chosen so the potential has no Fourier content parallel to it: modes
  // f parallel to k see a |xi|-independent symbol and would never decay
  std::array<int, 3> k = {1, 0, 1};
  std::vector<double> Rs, scaled, contractions;
  for (int j = 3; j <= 6; ++j) {
    double R = std::pow(2.0, j);  // 8 .. 64, a x8 span in |xi|
    auto p = build_xi_pair(k, R);
    auto sol = solve_omega(H, p.xi1);
    CHECK(sol.converged);
    double xlen = std::sqrt(std::real(cdot(
        p.xi1, {std::conj(p.xi1[0]), std::conj(p.xi1[1]), std::conj(p.xi1[2])})));
    Rs.push_back(xlen);
    scaled.push_back(sol.l2_norm * xlen);
    contractions.push_back(sol.contraction);
  }
  // ||omega|| * |xi| bounded within a factor 3 of its median
  std::vector<double> sorted = scaled;
  std::sort(sorted.begin(), sorted.end());
  double median = 0.5 * (sorted[1] + sorted[2]);
  for (double s : scaled) {
    CHECK(s < 3 * median);
    CHECK(s > median / 3);
  }
  // empirical contraction factor decays like 1/|xi|
  CHECK(loglog_slope(Rs, contractions) == doctest::Approx(-1.0).epsilon(0.2));
}

TEST_CASE("conjugated-equation residual is small at production resolution") {
  auto g = SpatialGrid::torus(3, 32);
  Field H = sample(g, [](double x, double y, double z) {
    return 0.6 * std::cos(2 * pi * x) * std::sin(2 * pi * y) +
           0.3 * std::cos(2 * pi * (y + z));
  });
  auto p = build_xi_pair({1, 0, 1}, 4.0);
  auto sol = solve_omega(H, p.xi1);
  CHECK(sol.converged);
  Field r = omega_equation_residual(H, p.xi1, sol);
  CHECK(r.max_abs() < 1e-5);
}

TEST_CASE("parabolic leading term is exact when unwindowed and frequency-free") {
  ParabolicCgoSpec spec;
  spec.grid = SpatialGrid::torus(2, 16);
  spec.time = TimeGrid{0.25, 32};
  spec.zeta = {1, 0, 0};
  spec.xi = {0, 0, 0};
  spec.tau = 0.0;
  spec.window = false;
  spec.rho_ladder = {8.0};
  auto res = build_parabolic_cgo(spec);
  CHECK(res.lead_residual[0] < 1e-6);
  CHECK(res.z_norm[0] < 1e-12);
}

TEST_CASE("parabolic remainder decays along the rho ladder") {
  // On a box the remainder is advected out through the walls at speed 2 rho,
  // so less of it accumulates as rho grows; a torus would recirculate it.
  ParabolicCgoSpec spec;
  spec.grid = SpatialGrid::box(2, 48);
  spec.time = TimeGrid{0.25, 512};
  spec.zeta = {1, 0, 0};
  spec.xi = {0, 2 * pi, 0};
  spec.tau = 1.0;
  spec.rho_ladder = {8, 16, 32, 64};
  auto res = build_parabolic_cgo(spec);
  REQUIRE(res.z_norm.size() == 4);
  CHECK(res.z_norm[1] < res.z_norm[0]);
  CHECK(res.z_norm[2] < res.z_norm[1]);
  CHECK(res.z_norm[3] < res.z_norm[2]);
}

TEST_CASE("drift line factor is one for constant drift normal to zeta") {
  auto phi = [](const std::array<double, 3>&) {
    return std::array<double, 3>{0.0, .7, 0.3};
  };
  double f = drift_line_factor(phi, {0.2, 0.1, 0.0}, {1, 0, 0}, 10.0);
  CHECK(f == doctest::Approx(1.0).epsilon(1e-12));
  // sanity: aligned constant drift integrates to exp(S phi/2)
  auto phi2 = [](const std::array<double, 3>&) {
    return std::array<double, 3>{0.5, 0, 0};
  };
  double f2 = drift_line_factor(phi2, {0, 0, 0}, {1, 0, 0}, 2.0);
  CHECK(f2 == doctest::Approx(std::exp(0.5)).epsilon(1e-10));
}

TEST_CASE("corner moments decay at the predicted rates (2D)") {
  CornerSpec spec;
  spec.dim = 2;
  spec.axis = {1, 0, 0};
  spec.half_angle = 0.6;
  spec.height = 1.0;
  std::vector<double> taus = {8, 16, 32, 64, 128};
  auto m = corner_cgo_moments(spec, taus, 0.5);
  CHECK(m.slope_I0 == doctest::Approx(-2.0).epsilon(0.075));
  CHECK(m.slope_Ialpha == doctest::Approx(-2.5).epsilon(0.08));
  // cap norm bounded by tau e^{-rho_hat h tau} up to a constant
  for (size_t i = 0; i < taus.size(); ++i) {
    double bound = 10.0 * taus[i] * std::exp(-m.rho_hat * spec.height * taus[i]);
    CHECK(m.cap_norm[i] <= bound);
  }
}

TEST_CASE("corner moments decay at the predicted rates (3D)") {
  CornerSpec spec;
  spec.dim = 3;
  spec.axis = {0, 0, 1};
  spec.half_angle = 0.5;
  spec.height = 1.0;
  std::vector<double> taus = {8, 16, 32, 64, 128};
  auto m = corner_cgo_moments(spec, taus, 0.5);
  CHECK(m.slope_I0 == doctest::Approx(-3.0).epsilon(0.05));
  CHECK(m.slope_Ialpha == doctest::Approx(-3.5).epsilon(0.06));
}

TEST_CASE("corner spec validation") {
  CornerSpec bad;
  bad.half_angle = 2.0;
  CHECK_THROWS(corner_cgo_moments(bad, {8, 16}));
  CornerSpec tilted;
  tilted.axis = {2, 0, 0};
  CHECK_THROWS(corner_cgo_moments(tilted, {8, 16}));
}
