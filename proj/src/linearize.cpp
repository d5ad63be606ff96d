#include "mfglab/linearize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfglab {

namespace {

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

// sign * kappa * grad u, per axis, sampled at every time node
std::vector<SpaceTimeField> kappa_grad(const SpaceTimeField& u,
                                       const Field& kappa, double sign) {
  int dim = u.grid.dim;
  std::vector<SpaceTimeField> out(dim, SpaceTimeField(u.grid, u.time));
  for (int n = 0; n <= u.time.steps; ++n) {
    auto gr = gradient(u.slice(n));
    for (int a = 0; a < dim; ++a) {
      Field f = hadamard(kappa, gr[a]);
      f *= sign;
      out[a].set_slice(n, f);
    }
  }
  return out;
}

// div(m0 kappa grad u) at every time node (the u -> m coupling source)
SpaceTimeField coupling_div(const SpaceTimeField& m0, const Field& kappa,
                            const SpaceTimeField& u) {
  SpaceTimeField out(u.grid, u.time);
  int dim = u.grid.dim;
  for (int n = 0; n <= u.time.steps; ++n) {
    auto gr = gradient(u.slice(n));
    Field m0n = m0.slice(n);
    std::vector<Field> flux(dim);
    for (int a = 0; a < dim; ++a)
      flux[a] = hadamard(m0n, hadamard(kappa, gr[a]));
    out.set_slice(n, divergence(flux));
  }
  return out;
}

double interior_max(const Field& f,
                    const std::vector<std::uint8_t>* mask) {
  double worst = 0.0;
  for (long i = 0; i < f.size(); ++i) {
    if (f.grid.kind == GridKind::NeumannBox && f.grid.is_boundary(i)) continue;
    if (mask && (*mask)[i]) continue;
    worst = std::max(worst, std::abs(f[i]));
  }
  return worst;
}

struct LinearPairSpec {
  const MFGSolution* bg = nullptr;
  const Field* F1 = nullptr;
  const Field* G1 = nullptr;
  SpaceTimeField hjb_extra;  // extra source in the u-equation (time nodes)
  SpaceTimeField fp_extra;   // extra source in the m-equation (time nodes)
  Field terminal_extra;      // added to u(T) on top of G1 m(T)
  Field m_init;
};

// midpoint-collocation residual of the coupled linear pair, matching the
// stepper (spatial terms on averaged slices, sources averaged over nodes)
double pair_residual_max(const SpaceTimeField& u1, const SpaceTimeField& m1,
                         const LinearPairSpec& s) {
  const SpatialGrid& g = u1.grid;
  const TimeGrid& tg = u1.time;
  double tau = tg.tau();
  int dim = g.dim;
  const Field& kappa = s.bg->kappa;
  const std::vector<std::uint8_t>* mask =
      s.bg->inclusion_mask ? &*s.bg->inclusion_mask : nullptr;
  bool coupled = s.bg->m.max_abs() > 0.0;
  SpaceTimeField cpl =
      coupled ? coupling_div(s.bg->m, kappa, u1) : SpaceTimeField(g, tg);

  double worst = 0.0;
  for (int n = 0; n < tg.steps; ++n) {
    Field un = u1.slice(n), un1 = u1.slice(n + 1);
    Field mn = m1.slice(n), mn1 = m1.slice(n + 1);
    Field ubar = 0.5 * (un + un1);
    Field mbar = 0.5 * (mn + mn1);
    Field u0bar = 0.5 * (s.bg->u.slice(n) + s.bg->u.slice(n + 1));
    auto gub = gradient(ubar);
    auto gu0b = gradient(u0bar);

    Field Rh = (-1.0 / tau) * (un1 - un);
    Rh -= laplacian(ubar);
    for (int a = 0; a < dim; ++a)
      Rh += hadamard(hadamard(kappa, gu0b[a]), gub[a]);
    Field sh = hadamard(*s.F1, mn) + hadamard(*s.F1, mn1) +
               s.hjb_extra.slice(n) + s.hjb_extra.slice(n + 1);
    sh *= 0.5;
    Rh -= sh;

    Field Rf = (1.0 / tau) * (mn1 - mn);
    Rf -= laplacian(mbar);
    std::vector<Field> flux(dim);
    for (int a = 0; a < dim; ++a)
      flux[a] = hadamard(mbar, hadamard(kappa, gu0b[a]));
    Rf -= divergence(flux);
    Field sf = s.fp_extra.slice(n) + s.fp_extra.slice(n + 1) + cpl.slice(n) +
               cpl.slice(n + 1);
    sf *= 0.5;
    Rf -= sf;

    worst = std::max(worst, interior_max(Rh, mask));
    worst = std::max(worst, interior_max(Rf, mask));
  }
  return worst;
}

LinearizedSolution solve_linear_pair(const LinearPairSpec& s) {
  const MFGSolution& bg = *s.bg;
  const SpatialGrid& g = bg.u.grid;
  const TimeGrid& tg = bg.u.time;
  if (!(bg.kappa.grid == g))
    throw std::invalid_argument(
        "solve_linear_pair: background carries no Hamiltonian grid");
  const std::vector<std::uint8_t>* mask =
      bg.inclusion_mask ? &*bg.inclusion_mask : nullptr;

  auto bneg = kappa_grad(bg.u, bg.kappa, -1.0);  // HJB drift -kappa grad u0
  auto dpos = kappa_grad(bg.u, bg.kappa, +1.0);  // FP divergence-form drift
  bool coupled = bg.m.max_abs() > 0.0;

  LinearizedSolution out;
  out.u = SpaceTimeField(g, tg);
  out.m = SpaceTimeField(g, tg);
  out.converged = false;

  const int max_iters = 80;
  for (int it = 0; it < max_iters; ++it) {
    // forward density response (uses the current u-iterate in the coupling)
    SpaceTimeField fp_src = s.fp_extra;
    if (coupled) fp_src += coupling_div(bg.m, bg.kappa, out.u);
    HeatProblem fp;
    fp.grid = g;
    fp.time = tg;
    fp.direction = Direction::Forward;
    fp.data = s.m_init;
    fp.source = &fp_src;
    fp.div_drift = &dpos;
    fp.dirichlet_mask = mask;
    SpaceTimeField m_new = solve_heat(fp).w;

    // backward value response with the fresh density in the source
    SpaceTimeField hjb_src = s.hjb_extra;
    for (int n = 0; n <= tg.steps; ++n) {
      Field add = hadamard(*s.F1, m_new.slice(n));
      Field cur = hjb_src.slice(n);
      cur += add;
      hjb_src.set_slice(n, cur);
    }
    Field terminal = hadamard(*s.G1, m_new.slice(tg.steps));
    terminal += s.terminal_extra;
    HeatProblem hj;
    hj.grid = g;
    hj.time = tg;
    hj.direction = Direction::Backward;
    hj.data = terminal;
    hj.source = &hjb_src;
    hj.drift = &bneg;
    hj.dirichlet_mask = mask;
    SpaceTimeField u_new = solve_heat(hj).w;

    SpaceTimeField du = u_new - out.u;
    SpaceTimeField dm = m_new - out.m;
    double change = std::max(du.max_abs(), dm.max_abs());
    out.u = std::move(u_new);
    out.m = std::move(m_new);
    double scale = 1.0 + std::max(out.u.max_abs(), out.m.max_abs());
    if (!coupled || change <= 1e-13 * scale) {
      out.converged = true;
      break;
    }
  }
  out.residual = pair_residual_max(out.u, out.m, s);
  return out;
}

void require_power_series(const CostModel& c, const char* who) {
  if (!std::holds_alternative<PowerSeriesCost>(c))
    throw std::invalid_argument(std::string(who) +
                                ": requires a power-series running cost");
}

// d^2/dz^2 U(x, z) at z = m
Field series_second_derivative(const PowerSeriesCost& c, const Field& m) {
  Field out(m.grid, 0.0);
  int K = static_cast<int>(c.coeff.size());
  Field w = m;
  for (long i = 0; i < w.size(); ++i) {
    w[i] -= c.base;
    if (std::abs(w[i]) > c.radius + 1e-14)
      throw std::domain_error("series_second_derivative: radius exceeded");
  }
  Field wpow(m.grid, 1.0);
  for (int k = 2; k <= K; ++k) {
    Field term = hadamard(c.coeff[k - 1], wpow);
    term *= 1.0 / factorial(k - 2);
    out += term;
    wpow = hadamard(wpow, w);
  }
  return out;
}

}  // namespace

MFGSolution zero_background(const SpatialGrid& g, const TimeGrid& tg,
                            const Hamiltonian& H, BoundaryKind bc) {
  MFGSolution s;
  s.u = SpaceTimeField(g, tg);
  s.m = SpaceTimeField(g, tg);
  s.converged = true;
  s.bc = bc;
  s.kappa = H.kappa;
  return s;
}

LinearizedSolution solve_linearized_order1(const MFGSolution& background,
                                           const Hamiltonian& H,
                                           const Field& F1, const Field& G1,
                                           const LinearizedData& data) {
  H.validate();
  const SpatialGrid& g = background.u.grid;
  if (!(F1.grid == g) || !(G1.grid == g))
    throw std::invalid_argument(
        "solve_linearized_order1: coefficient grid mismatch");
  LinearPairSpec s;
  s.bg = &background;
  s.F1 = &F1;
  s.G1 = &G1;
  s.hjb_extra = SpaceTimeField(g, background.u.time);
  s.fp_extra = SpaceTimeField(g, background.u.time);
  s.terminal_extra = Field(g, 0.0);
  s.m_init = Field(g, 0.0);
  if (data.h1) s.terminal_extra = *data.h1;
  if (data.f1) s.m_init = *data.f1;
  LinearizedSolution out = solve_linear_pair(s);
  out.order = 1;
  return out;
}

LinearizedSolution solve_linearized_order2(const MFGSolution& background,
                                           const Hamiltonian& H,
                                           const LinearizedSolution& l1,
                                           const LinearizedSolution& l2,
                                           const Field& F1, const Field& F2,
                                           const Field& G1, const Field& G2) {
  H.validate();
  const SpatialGrid& g = background.u.grid;
  const TimeGrid& tg = background.u.time;
  if (l1.order != 1 || l2.order != 1)
    throw std::invalid_argument(
        "solve_linearized_order2: inputs must be first-order responses");
  if (!(l1.u.grid == g) || !(l2.u.grid == g))
    throw std::invalid_argument("solve_linearized_order2: grid mismatch");

  LinearPairSpec s;
  s.bg = &background;
  s.F1 = &F1;
  s.G1 = &G1;
  s.hjb_extra = SpaceTimeField(g, tg);
  s.fp_extra = SpaceTimeField(g, tg);
  s.m_init = Field(g, 0.0);
  int dim = g.dim;
  for (int n = 0; n <= tg.steps; ++n) {
    auto g1 = gradient(l1.u.slice(n));
    auto g2 = gradient(l2.u.slice(n));
    Field m1n = l1.m.slice(n);
    Field m2n = l2.m.slice(n);

    // u-equation: F2 m1 m2 - kappa grad u1 . grad u2 (F1 M joins per sweep)
    Field sh = hadamard(F2, hadamard(m1n, m2n));
    for (int a = 0; a < dim; ++a)
      sh -= hadamard(background.kappa, hadamard(g1[a], g2[a]));
    s.hjb_extra.set_slice(n, sh);

    // m-equation: div(m1 kappa grad u2) + div(m2 kappa grad u1)
    std::vector<Field> flux(dim);
    for (int a = 0; a < dim; ++a)
      flux[a] = hadamard(m1n, hadamard(background.kappa, g2[a])) +
                hadamard(m2n, hadamard(background.kappa, g1[a]));
    s.fp_extra.set_slice(n, divergence(flux));
  }
  s.terminal_extra =
      hadamard(G2, hadamard(l1.m.slice(tg.steps), l2.m.slice(tg.steps)));

  LinearizedSolution out = solve_linear_pair(s);
  out.order = 2;
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(x.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

FrechetReport frechet_validate(const MFGProblem& base, const Field& direction,
                               const std::vector<double>& eps_ladder,
                               const MFGOpts& opts) {
  require_power_series(base.running_cost, "frechet_validate");
  const auto& ps = std::get<PowerSeriesCost>(base.running_cost);

  MFGSolution S0 = solve_mfg(base, opts);
  Field F1 = eval_cost_derivative(ps, S0.m.slice(0));
  Field F2 = series_second_derivative(ps, S0.m.slice(0));
  Field G1(base.grid, 0.0), G2(base.grid, 0.0);
  if (base.terminal_cost) {
    G1 = eval_cost_derivative(*base.terminal_cost,
                              S0.m.slice(base.time.steps));
    G2 = series_second_derivative(*base.terminal_cost,
                                  S0.m.slice(base.time.steps));
  }

  LinearizedData data;
  data.f1 = &direction;
  LinearizedSolution l1 = solve_linearized_order1(S0, base.H, F1, G1, data);
  LinearizedSolution l11 =
      solve_linearized_order2(S0, base.H, l1, l1, F1, F2, G1, G2);

  FrechetReport rep;
  for (double eps : eps_ladder) {
    MFGProblem p = base;
    Field bump = direction;
    bump *= eps;
    p.m0 = base.m0 + bump;
    MFGSolution Se = solve_mfg(p, opts);

    SpaceTimeField du = Se.u - S0.u;
    SpaceTimeField dm = Se.m - S0.m;
    SpaceTimeField lu = l1.u, lm = l1.m;
    lu *= eps;
    lm *= eps;
    SpaceTimeField r1u = du - lu, r1m = dm - lm;
    double rem1 = std::hypot(r1u.l2(), r1m.l2());

    SpaceTimeField qu = l11.u, qm = l11.m;
    qu *= 0.5 * eps * eps;
    qm *= 0.5 * eps * eps;
    SpaceTimeField r2u = r1u - qu, r2m = r1m - qm;
    double rem2 = std::hypot(r2u.l2(), r2m.l2());

    rep.eps.push_back(eps);
    rep.rem1.push_back(rem1);
    rep.rem2.push_back(rem2);
  }
  rep.slope1 = loglog_slope(rep.eps, rep.rem1);
  rep.slope2 = loglog_slope(rep.eps, rep.rem2);
  return rep;
}

}  // namespace mfglab
