#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mfglab/carleman.hpp"
#include "mfglab/ops.hpp"

using namespace mfglab;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("temporal weight evaluates and grows") {
  TimeWeight w{1.0, 3.0, 1.0};
  CHECK(w(0.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  double prev = w(0.0);
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    CHECK(w(t) > prev);
    prev = w(t);
  }
}

TEST_CASE("space-time weight structure on a box") {
  auto g = SpatialGrid::box(1, 65);
  double T = 1.0;
  SpaceTimeWeight w = make_box_weight(g, T, 1.0);

  SUBCASE("time bump is symmetric to round-off") {
    for (double t : {0.1, 0.2, 0.35, 0.5})
      CHECK(w.mu(t) == doctest::Approx(w.mu(T - t)).epsilon(1e-15));
    CHECK(w.mu(0.0) == 0.0);
    CHECK(w.mu(T) == 0.0);
  }

  SUBCASE("profile is positive inside and vanishes on the hidden face") {
    CHECK(std::abs(w.eta[g.size() - 1]) < 1e-14);
    for (long i = 0; i + 1 < g.size(); ++i) CHECK(w.eta[i].real() > 0.0);
  }

  SUBCASE("gradient identity d_x phi = lambda (d_x eta) phi") {
    double t = 0.4;
    Field phif = sample(g, [&](double x) {
      return std::exp(w.lambda * (1.0 - x)) / w.mu(t);
    });
    Field dphi = gradient(phif)[0];
    for (long i = 1; i + 1 < g.size(); ++i) {
      double expected = w.lambda * (-1.0) * phif[i].real();
      CHECK(dphi[i].real() == doctest::Approx(expected).epsilon(1e-3));
    }
  }

  SUBCASE("time derivative of alpha is controlled by phi^2") {
    auto cmax = [&](double dt) {
      double c = 0.0;
      for (double t : {0.15, 0.3, 0.5, 0.7, 0.85})
        for (long i = 0; i < g.size(); ++i) {
          double da = (w.alpha(i, t + dt) - w.alpha(i, t - dt)) / (2.0 * dt);
          double p = w.phi(i, t);
          c = std::max(c, std::abs(da) / (p * p));
        }
      return c;
    };
    double c1 = cmax(1e-4), c2 = cmax(5e-5);
    CHECK(std::isfinite(c1));
    CHECK(c1 == doctest::Approx(c2).epsilon(1e-4));
  }

  SUBCASE("sup of phi^3 e^{2 s alpha} is finite and shrinks with s") {
    TimeGrid tg{T, 64};
    double prev = sup_weighted(w, tg, 1.0, 3.0);
    CHECK(std::isfinite(prev));
    CHECK(prev > 0.0);
    for (double s : {2.0, 4.0, 8.0}) {
      double cur = sup_weighted(w, tg, s, 3.0);
      CHECK(std::isfinite(cur));
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("moving-front weight peaks at the front") {
  auto g = SpatialGrid::box(1, 17);
  UcpWeight w;
  w.d = sample(g, [](double x) { return x; });
  w.beta = 2.0;
  w.lambda = 1.5;
  w.t0 = 0.3;
  long i = 8;
  double peak = w(i, 0.3);
  CHECK(peak == doctest::Approx(std::exp(1.5 * g.coord(0, 8))).epsilon(1e-14));
  CHECK(w(i, 0.5) < peak);
  CHECK(w(i, 0.1) < peak);
}

TEST_CASE("single-equation weighted inequality") {
  auto g = SpatialGrid::box(1, 33);
  TimeGrid tg{1.0, 64};
  SpaceTimeWeight w = make_box_weight(g, tg.T, 1.0);
  std::vector<double> ladder{4.0, 8.0, 16.0, 32.0};

  SUBCASE("zero trial contributes nothing") {
    SpaceTimeField zero(g, tg);
    CHECK(parabolic_carleman_log_ratio(zero, w, 8.0) ==
          -std::numeric_limits<double>::infinity());
  }

  SUBCASE("ratio is invariant under scaling the trial") {
    SpaceTimeField u = sample_spacetime(g, tg, [](double x, double t) {
      return std::cos(pi * x) * (1.0 + 0.5 * std::cos(pi * t)) +
             0.3 * std::cos(2.0 * pi * x) * std::sin(pi * t);
    });
    SpaceTimeField u2 = u;
    u2 *= 2.0;
    for (double s : ladder) {
      double r1 = parabolic_carleman_log_ratio(u, w, s);
      double r2 = parabolic_carleman_log_ratio(u2, w, s);
      CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));
    }
  }

  SUBCASE("ratios stay bounded across the s ladder over random trials") {
    RatioReport rep = verify_parabolic_carleman(g, tg, 50, ladder, w, 20260826);
    for (double lr : rep.max_log_ratio) CHECK(std::isfinite(lr));
    CHECK(rep.log_slope <= 0.1);
    CHECK(rep.bounded);
  }
}

TEST_CASE("coupled-pair weighted inequality") {
  auto g = SpatialGrid::box(1, 33);
  TimeGrid tg{1.0, 64};
  SpaceTimeWeight w = make_box_weight(g, tg.T, 1.0);
  std::vector<double> ladder{4.0, 8.0, 16.0, 32.0};

  SUBCASE("ratios stay bounded across the s ladder over random trials") {
    RatioReport rep =
        verify_mfg_carleman(g, tg, 30, ladder, w, 777, 1.0, 0.0);
    for (double lr : rep.max_log_ratio) CHECK(std::isfinite(lr));
    CHECK(rep.log_slope <= 0.1);
    CHECK(rep.bounded);
  }

  SUBCASE("a lower-order potential barely moves the ratios") {
    RatioReport base = verify_mfg_carleman(g, tg, 10, ladder, w, 99, 1.0, 0.0);
    RatioReport pot = verify_mfg_carleman(g, tg, 10, ladder, w, 99, 1.0, 0.5);
    for (size_t r = 0; r < ladder.size(); ++r)
      CHECK(std::abs(pot.max_log_ratio[r] - base.max_log_ratio[r]) < 0.05);
  }
}

TEST_CASE("monolithic solver for the linear forward-backward pair") {
  auto g = SpatialGrid::box(1, 33);
  TimeGrid tg{1.0, 64};
  double c0 = 1.0;

  SUBCASE("zero data produce the zero solution") {
    SpaceTimeField zero(g, tg);
    Field zf(g);
    CoupledSolution sol = solve_coupled_linear(g, tg, c0, zero, zero, zf, zf);
    CHECK(sol.u.max_abs() < 1e-12);
    CHECK(sol.m.max_abs() < 1e-12);
  }

  SUBCASE("manufactured pair is reproduced at scheme accuracy") {
    auto uex = [](double x, double t) {
      return std::cos(pi * x) * (1.0 - t) * (1.0 - t);
    };
    auto mex = [](double x, double t) {
      return 0.5 * std::cos(2.0 * pi * x) * t * t + 0.2 * t;
    };
    SpaceTimeField F = sample_spacetime(g, tg, [&](double x, double t) {
      double ut = -2.0 * std::cos(pi * x) * (1.0 - t);
      double uxx = -pi * pi * uex(x, t);
      return ut + uxx - c0 * mex(x, t);
    });
    SpaceTimeField G = sample_spacetime(g, tg, [&](double x, double t) {
      double mt = std::cos(2.0 * pi * x) * t + 0.2;
      double mxx = -4.0 * pi * pi * 0.5 * std::cos(2.0 * pi * x) * t * t;
      double uxx = -pi * pi * uex(x, t);
      return mt - mxx - uxx;
    });
    Field uT = sample(g, [&](double x) { return uex(x, tg.T); });
    Field m0 = sample(g, [&](double x) { return mex(x, 0.0); });
    CoupledSolution sol = solve_coupled_linear(g, tg, c0, F, G, uT, m0);
    SpaceTimeField du = sol.u - sample_spacetime(g, tg, uex);
    SpaceTimeField dm = sol.m - sample_spacetime(g, tg, mex);
    CHECK(du.max_abs() < 5e-3);
    CHECK(dm.max_abs() < 5e-3);
  }

  SUBCASE("solution map is linear in the data") {
    SpaceTimeField F = sample_spacetime(g, tg, [](double x, double t) {
      return std::cos(pi * x) * (1.0 + t);
    });
    SpaceTimeField G = sample_spacetime(g, tg, [](double x, double t) {
      return std::cos(3.0 * pi * x) * (2.0 - t);
    });
    Field zf(g);
    CoupledSolution a = solve_coupled_linear(g, tg, c0, F, G, zf, zf);
    SpaceTimeField F2 = F, G2 = G;
    F2 *= 2.0;
    G2 *= 2.0;
    CoupledSolution b = solve_coupled_linear(g, tg, c0, F2, G2, zf, zf);
    SpaceTimeField half_b = b.u;
    half_b *= 0.5;
    CHECK((half_b - a.u).max_abs() < 1e-10);
  }
}

TEST_CASE("source recovery stability ratios") {
  auto g32 = SpatialGrid::box(1, 33);
  auto g64 = SpatialGrid::box(1, 65);
  double t0 = 0.25;

  SUBCASE("vanishing temporal profile at t0 is rejected") {
    CHECK_THROWS_AS(
        lipschitz_source_experiment(g32, TimeGrid{1.0, 32}, 0.5, 1, 1),
        std::invalid_argument);
  }

  SUBCASE("ratios are bounded and stable under refinement") {
    StabilityReport a =
        lipschitz_source_experiment(g32, TimeGrid{1.0, 32}, t0, 30, 4242);
    StabilityReport b =
        lipschitz_source_experiment(g64, TimeGrid{1.0, 64}, t0, 30, 4242);
    for (double r : a.ratios) {
      CHECK(std::isfinite(r));
      CHECK(r > 0.0);
    }
    CHECK(std::abs(b.max_ratio - a.max_ratio) <= 0.2 * a.max_ratio);
  }

  SUBCASE("same seed reproduces the ratios exactly") {
    StabilityReport a =
        lipschitz_source_experiment(g32, TimeGrid{1.0, 32}, t0, 5, 7);
    StabilityReport b =
        lipschitz_source_experiment(g32, TimeGrid{1.0, 32}, t0, 5, 7);
    for (size_t i = 0; i < a.ratios.size(); ++i)
      CHECK(a.ratios[i] == b.ratios[i]);
  }
}

TEST_CASE("interior estimate for the forward problem") {
  auto g = SpatialGrid::box(1, 33);
  StabilityReport a =
      forward_stability_experiment(g, TimeGrid{1.0, 32}, 0.2, 20, 31337);
  for (double r : a.ratios) {
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);
  }
  StabilityReport b = forward_stability_experiment(
      SpatialGrid::box(1, 65), TimeGrid{1.0, 64}, 0.2, 20, 31337);
  CHECK(b.max_ratio < 1.5 * a.max_ratio);
  CHECK(a.max_ratio < 1.5 * b.max_ratio);
}

TEST_CASE("terminal-data continuity of the game system") {
  auto g = SpatialGrid::torus(1, 64);
  TimeGrid tg{1.0, 64};
  MFGProblem base;
  base.grid = g;
  base.time = tg;
  base.H = Hamiltonian::constant(g);
  PowerSeriesCost cost;
  cost.base = 1.0;
  cost.coeff = {Field(g, 0.1)};
  cost.radius = 0.5;
  base.running_cost = cost;
  base.psi = Field(g);
  base.m0 = sample(g, [](double x) { return 1.0 + 0.1 * std::cos(2.0 * pi * x); });
  base.bc = BoundaryKind::Periodic;
  double eps = 0.25;

  SUBCASE("exponent bookkeeping matches the closed form") {
    // smallest k with (eps+1)^{-k} < 1/2 at eps = 0.25 is k = 4
    CHECK(std::pow(1.25, -3.0) >= 0.5);
    CHECK(std::pow(1.25, -4.0) < 0.5);
    HolderReport rep = holder_stability_experiment(base, eps, 4, {1e-2, 1e-3});
    CHECK(rep.rho_theory ==
          doctest::Approx((1.0 / 6.0) * std::pow(1.25 / 2.0, 4.0))
              .epsilon(1e-14));
  }

  SUBCASE("unperturbed terminal data reproduce the solution") {
    HolderReport rep = holder_stability_experiment(base, eps, 4, {0.0});
    CHECK(rep.diff[0] < 1e-8);
  }

  SUBCASE("difference decays at least at the guaranteed rate") {
    HolderReport rep = holder_stability_experiment(
        base, eps, 4, {1e-2, 1e-3, 1e-4, 1e-5});
    for (size_t i = 1; i < rep.diff.size(); ++i)
      CHECK(rep.diff[i] < rep.diff[i - 1]);
    CHECK(rep.rho_hat >= rep.rho_theory);
    CHECK(rep.lambda_clamped);
    for (double lam : rep.lambda_schedule) CHECK(lam >= 1.0);
  }
}
