#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mfglab/linearize.hpp"

using namespace mfglab;
namespace {
constexpr double pi = std::numbers::pi;

MFGProblem quadratic_base(const SpatialGrid& g, const TimeGrid& tg,
                          double m0_level) {
  // running cost U(z) = z^2 / 2 about z = 0
  PowerSeriesCost F;
  F.base = 0.0;
  F.radius = 3.0;
  F.coeff = {Field(g, 0.0), Field(g, 1.0)};
  MFGProblem p;
  p.grid = g;
  p.time = tg;
  p.H = Hamiltonian::constant(g);
  p.running_cost = F;
  p.psi = Field(g, 0.0);
  p.m0 = Field(g, m0_level);
  return p;
}

MFGOpts tight_opts() {
  MFGOpts o;
  o.tol = 1e-12;
  o.newton_tol = 1e-13;
  o.max_iters = 400;
  return o;
}
}  // namespace

TEST_CASE("zero data produces the zero response") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 32};
  auto H = Hamiltonian::constant(g);
  auto bg = zero_background(g, tg, H);
  Field F1 = sample(g, [](double x) { return std::sin(2 * pi * x); });
  Field G1(g, 0.3);
  auto l = solve_linearized_order1(bg, H, F1, G1, LinearizedData{});
  CHECK(l.u.max_abs() == 0.0);
  CHECK(l.m.max_abs() == 0.0);
  CHECK(l.residual == 0.0);
  CHECK(l.converged);
}

TEST_CASE("trivial background: density response is the plain heat evolution") {
  auto g = SpatialGrid::torus(1, 48);
  TimeGrid tg{0.25, 48};
  auto H = Hamiltonian::constant(g);
  auto bg = zero_background(g, tg, H);
  Field f1 = sample(g, [](double x) { return 1.0 + std::cos(2 * pi * x); });
  Field F1(g, 0.7), G1(g, 0.0);
  LinearizedData data;
  data.f1 = &f1;
  auto l = solve_linearized_order1(bg, H, F1, G1, data);
  CHECK(l.converged);
  CHECK(l.residual < 1e-11);

  // independent run of the same stepper on the pure heat problem
  SpaceTimeField zero_src(g, tg);
  HeatProblem hp;
  hp.grid = g;
  hp.time = tg;
  hp.data = f1;
  hp.source = &zero_src;
  auto ref = solve_heat(hp).w;
  CHECK((l.m - ref).max_abs() < 1e-13);
}

TEST_CASE("trivial background: value response matches the scalar mode recurrence") {
  // f1 = cos(2 pi x) evolves mode-by-mode; with F1 = alpha const and G1 = 0
  // the u-response is a single backward Crank-Nicolson recurrence.
  auto g = SpatialGrid::torus(1, 48);
  TimeGrid tg{0.25, 64};
  double tau = tg.tau();
  auto H = Hamiltonian::constant(g);
  auto bg = zero_background(g, tg, H);
  double alpha = 0.7;
  Field f1 = sample(g, [](double x) { return std::cos(2 * pi * x); });
  Field F1(g, alpha), G1(g, 0.0);
  LinearizedData data;
  data.f1 = &f1;
  auto l = solve_linearized_order1(bg, H, F1, G1, data);

  double beta = 4 * pi * pi;
  double rho = (1 - tau * beta / 2) / (1 + tau * beta / 2);
  std::vector<double> mamp(tg.steps + 1), uamp(tg.steps + 1, 0.0);
  mamp[0] = 1.0;
  for (int n = 0; n < tg.steps; ++n) mamp[n + 1] = rho * mamp[n];
  for (int n = tg.steps - 1; n >= 0; --n) {
    double src = alpha * 0.5 * (mamp[n] + mamp[n + 1]);
    uamp[n] = (uamp[n + 1] * (1 - tau * beta / 2) + tau * src) /
              (1 + tau * beta / 2);
  }
  double worst = 0.0;
  for (int n = 0; n <= tg.steps; ++n) {
    Field want = sample(g, [&](double x) {
      return uamp[n] * std::cos(2 * pi * x);
    });
    worst = std::max(worst, (l.u.slice(n) - want).max_abs());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("responses are linear in the data") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 32};
  auto H = Hamiltonian::constant(g);
  auto bg = zero_background(g, tg, H);
  Field F1(g, 0.5);
  Field G1 = sample(g, [](double x) { return 0.2 * std::cos(2 * pi * x); });
  Field fa = sample(g, [](double x) { return std::cos(2 * pi * x); });
  Field fb = sample(g, [](double x) { return std::sin(4 * pi * x); });

  LinearizedData da, db, dsum;
  da.f1 = &fa;
  db.f1 = &fb;
  Field fsum = fa + fb;
  dsum.f1 = &fsum;
  auto la = solve_linearized_order1(bg, H, F1, G1, da);
  auto lb = solve_linearized_order1(bg, H, F1, G1, db);
  auto ls = solve_linearized_order1(bg, H, F1, G1, dsum);
  CHECK((ls.u - (la.u + lb.u)).max_abs() < 1e-12);
  CHECK((ls.m - (la.m + lb.m)).max_abs() < 1e-12);

  Field f2 = 2.0 * fa;
  LinearizedData d2;
  d2.f1 = &f2;
  auto l2 = solve_linearized_order1(bg, H, F1, G1, d2);
  SpaceTimeField scaled = la.u;
  scaled *= 2.0;
  CHECK((l2.u - scaled).max_abs() < 1e-12);
}

TEST_CASE("coupled response on a constant unit background is the derivative") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 48};
  auto base = quadratic_base(g, tg, 1.0);
  auto opts = tight_opts();
  auto S0 = solve_mfg(base, opts);
  REQUIRE(S0.converged);
  REQUIRE(S0.m.max_abs() > 0.5);  // genuinely coupled background

  const auto& ps = std::get<PowerSeriesCost>(base.running_cost);
  Field F1 = eval_cost_derivative(ps, S0.m.slice(0));
  Field G1(g, 0.0);
  Field f = sample(g, [](double x) { return std::cos(2 * pi * x); });
  LinearizedData data;
  data.f1 = &f;
  auto l = solve_linearized_order1(S0, base.H, F1, G1, data);
  CHECK(l.converged);
  CHECK(l.residual < 1e-10);

  // density-response mass is conserved
  double mass0 = std::abs(integrate(l.m.slice(0)));
  for (int n : {tg.steps / 2, tg.steps}) {
    CHECK(std::abs(integrate(l.m.slice(n)) - integrate(l.m.slice(0))) <
          1e-12 * (1 + mass0));
  }

  // central finite difference of the nonlinear map
  double eps = 1e-3;
  MFGProblem pp = base, pm = base;
  Field bump = f;
  bump *= eps;
  pp.m0 = base.m0 + bump;
  pm.m0 = base.m0 - bump;
  auto Sp = solve_mfg(pp, opts);
  auto Sm = solve_mfg(pm, opts);
  SpaceTimeField fd_u = Sp.u - Sm.u;
  fd_u *= 1.0 / (2 * eps);
  SpaceTimeField fd_m = Sp.m - Sm.m;
  fd_m *= 1.0 / (2 * eps);
  CHECK((fd_u - l.u).max_abs() < 2e-5);
  CHECK((fd_m - l.m).max_abs() < 2e-5);
}

TEST_CASE("second order: zero first-order inputs give zero, arguments commute") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 32};
  auto H = Hamiltonian::constant(g);
  auto bg = zero_background(g, tg, H);
  Field F1(g, 0.0), F2(g, 1.0), G1(g, 0.0), G2(g, 0.2);

  LinearizedSolution z1;
  z1.order = 1;
  z1.u = SpaceTimeField(g, tg);
  z1.m = SpaceTimeField(g, tg);
  auto q0 = solve_linearized_order2(bg, H, z1, z1, F1, F2, G1, G2);
  CHECK(q0.u.max_abs() == 0.0);
  CHECK(q0.m.max_abs() == 0.0);

  Field fa = sample(g, [](double x) { return std::cos(2 * pi * x); });
  Field fb = sample(g, [](double x) { return std::sin(2 * pi * x); });
  Field Fl(g, 0.4);
  LinearizedData da, db;
  da.f1 = &fa;
  db.f1 = &fb;
  auto la = solve_linearized_order1(bg, H, Fl, G1, da);
  auto lb = solve_linearized_order1(bg, H, Fl, G1, db);
  auto qab = solve_linearized_order2(bg, H, la, lb, Fl, F2, G1, G2);
  auto qba = solve_linearized_order2(bg, H, lb, la, Fl, F2, G1, G2);
  CHECK((qab.u - qba.u).max_abs() == 0.0);
  CHECK((qab.m - qba.m).max_abs() == 0.0);
  CHECK(qab.residual < 1e-10);
}

TEST_CASE("second order matches the mixed central finite difference") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 48};
  auto base = quadratic_base(g, tg, 1.0);
  auto opts = tight_opts();
  auto S0 = solve_mfg(base, opts);
  const auto& ps = std::get<PowerSeriesCost>(base.running_cost);
  Field F1 = eval_cost_derivative(ps, S0.m.slice(0));
  Field F2(g, 1.0);  // second derivative of z^2/2
  Field G1(g, 0.0), G2(g, 0.0);

  Field fa = sample(g, [](double x) { return std::cos(2 * pi * x); });
  Field fb = sample(g, [](double x) { return std::sin(2 * pi * x); });
  LinearizedData da, db;
  da.f1 = &fa;
  db.f1 = &fb;
  auto la = solve_linearized_order1(S0, base.H, F1, G1, da);
  auto lb = solve_linearized_order1(S0, base.H, F1, G1, db);
  auto q = solve_linearized_order2(S0, base.H, la, lb, F1, F2, G1, G2);
  CHECK(q.converged);
  CHECK(q.residual < 1e-10);

  auto mixed_fd = [&](double d) {
    auto run = [&](double s1, double s2) {
      MFGProblem p = base;
      Field b1 = fa, b2 = fb;
      b1 *= s1 * d;
      b2 *= s2 * d;
      p.m0 = base.m0 + b1 + b2;
      return solve_mfg(p, opts);
    };
    auto spp = run(1, 1), spm = run(1, -1), smp = run(-1, 1), smm = run(-1, -1);
    SpaceTimeField num = spp.u - spm.u;
    num -= smp.u - smm.u;
    num *= 1.0 / (4 * d * d);
    return (num - q.u).max_abs();
  };
  double e1 = mixed_fd(0.08);
  double e2 = mixed_fd(0.04);
  CHECK(e1 < 1e-6);
  CHECK(e2 < 1e-6);
}

TEST_CASE("remainder ladders certify first- and second-order expansions") {
  auto g = SpatialGrid::torus(1, 32);
  TimeGrid tg{0.25, 64};
  auto base = quadratic_base(g, tg, 0.0);
  Field f = sample(g, [](double x) { return 1.0 + std::cos(2 * pi * x); });
  std::vector<double> ladder = {1e-1, 3.16e-2, 1e-2, 3.16e-3, 1e-3};
  auto rep = frechet_validate(base, f, ladder, tight_opts());

  CHECK(rep.slope1 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(rep.slope2 == doctest::Approx(3.0).epsilon(0.05));
  // remainders shrink monotonically down the ladder
  for (size_t i = 1; i < ladder.size(); ++i) {
    CHECK(rep.rem1[i] < rep.rem1[i - 1]);
    CHECK(rep.rem2[i] < rep.rem2[i - 1]);
  }
  // with no running cost the solution map is exactly linear in m0
  MFGProblem lin = base;
  auto& psl = std::get<PowerSeriesCost>(lin.running_cost);
  psl.coeff = {Field(g, 0.0)};
  auto rep_lin = frechet_validate(lin, f, {1e-1, 1e-2}, tight_opts());
  CHECK(rep_lin.rem1[0] < 1e-10);
  CHECK(rep_lin.rem1[1] < 1e-10);
}
