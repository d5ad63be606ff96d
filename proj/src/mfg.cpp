#include "mfglab/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mfglab {
namespace {

cplx dotc(const Field& a, const Field& b) {
  cplx s = 0.0;
  for (long i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

std::vector<Field> grad_slices(const SpaceTimeField& w, int n) {
  return gradient(w.slice(n));
}

double masked_max(const SpaceTimeField& r,
                  const std::vector<std::uint8_t>* mask) {
  if (!mask) return r.max_abs();
  double mx = 0.0;
  for (int n = 0; n <= r.time.steps; ++n)
    for (long i = 0; i < r.grid.size(); ++i)
      if (!(*mask)[i]) mx = std::max(mx, std::abs(r.at(n, i)));
  return mx;
}

double cost_base(const CostModel& c) {
  if (const auto* ps = std::get_if<PowerSeriesCost>(&c)) return ps->base;
  return 1.0;
}

// Damped Picard iteration with a Newton-linearized Hamiltonian in the
// backward solve and a conservative divergence-form drift in the forward one.
MFGSolution solve_core(const MFGProblem& p, const MFGOpts& opts,
                       const std::vector<std::uint8_t>* mask) {
  const SpatialGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  p.H.validate();
  if (!(p.m0.grid == g))
    throw std::invalid_argument("solve_mfg: m0 grid mismatch");
  if ((p.bc == BoundaryKind::Periodic) != (g.kind == GridKind::PeriodicTorus))
    throw std::invalid_argument("solve_mfg: bc does not match the grid kind");

  MFGSolution sol;
  sol.bc = p.bc;
  sol.kappa = p.H.kappa;
  if (p.inclusion_mask) sol.inclusion_mask = p.inclusion_mask;

  {
    Field dev = p.m0;
    dev -= Field(g, cost_base(p.running_cost));
    if (dev.max_abs() > p.smallness_delta)
      sol.warning = "initial density exceeds the smallness threshold";
  }

  SpaceTimeField m(g, tg);
  for (int n = 0; n <= tg.steps; ++n) m.set_slice(n, p.m0);
  SpaceTimeField u(g, tg);

  auto running_field = [&](const SpaceTimeField& mm) {
    SpaceTimeField F(g, tg);
    for (int n = 0; n <= tg.steps; ++n) {
      Field f = eval_cost(p.running_cost, mm.slice(n));
      if (p.running_source) f += p.running_source->slice(n);
      F.set_slice(n, f);
    }
    return F;
  };
  auto terminal_field = [&](const SpaceTimeField& mm) {
    return p.terminal_cost ? eval_cost(*p.terminal_cost, mm.slice(tg.steps))
                           : p.psi;
  };

  // backward HJB solve for given running/terminal data, Newton on the
  // quadratic gradient term, warm-started from the previous iterate
  auto solve_hjb = [&](const SpaceTimeField& F, const Field& uT,
                       SpaceTimeField& uk) {
    for (int k = 0; k < opts.newton_max; ++k) {
      std::vector<SpaceTimeField> b(g.dim, SpaceTimeField(g, tg));
      SpaceTimeField src = F;
      for (int n = 0; n <= tg.steps; ++n) {
        auto gr = grad_slices(uk, n);
        Field ham(g);
        for (int a = 0; a < g.dim; ++a) {
          Field kg = hadamard(p.H.kappa, gr[a]);
          b[a].set_slice(n, cplx(-1.0) * Field(kg));
          ham += hadamard(kg, gr[a]);
        }
        Field s = src.slice(n);
        s += cplx(0.5) * ham;
        src.set_slice(n, s);
      }
      HeatProblem hp;
      hp.grid = g;
      hp.time = tg;
      hp.direction = Direction::Backward;
      hp.data = uT;
      hp.source = &src;
      hp.drift = &b;
      hp.dirichlet_mask = mask;
      SpaceTimeField next = solve_heat(hp, opts.heat).w;
      double change = (next - uk).max_abs();
      uk = std::move(next);
      if (change < opts.newton_tol * (1.0 + uk.max_abs())) return;
    }
  };

  auto solve_fp = [&](const SpaceTimeField& uu) {
    std::vector<SpaceTimeField> d(g.dim, SpaceTimeField(g, tg));
    for (int n = 0; n <= tg.steps; ++n) {
      auto gr = grad_slices(uu, n);
      for (int a = 0; a < g.dim; ++a)
        d[a].set_slice(n, hadamard(p.H.kappa, gr[a]));
    }
    HeatProblem hp;
    hp.grid = g;
    hp.time = tg;
    hp.data = p.m0;
    hp.div_drift = &d;
    hp.dirichlet_mask = mask;
    return solve_heat(hp, opts.heat).w;
  };

  sol.converged = false;
  for (int j = 0; j < opts.max_iters; ++j) {
    solve_hjb(running_field(m), terminal_field(m), u);
    SpaceTimeField m_new = solve_fp(u);
    SpaceTimeField diff = m_new;
    diff -= m;
    double change = opts.damping * diff.l2();
    sol.change_log.push_back(change);
    diff *= opts.damping;
    m += diff;  // m <- damping * new + (1 - damping) * old
    if (change < opts.tol * (1.0 + m.l2())) {
      sol.converged = true;
      break;
    }
  }

  // final sweep without damping, so the returned pair satisfies the scheme
  SpaceTimeField Ffin = running_field(m);
  solve_hjb(Ffin, terminal_field(m), u);
  sol.m = solve_fp(u);
  sol.u = std::move(u);

  double mn = 0.0;
  for (int n = 0; n <= tg.steps; ++n)
    for (long i = 0; i < g.size(); ++i)
      mn = std::min(mn, sol.m.at(n, i).real());
  if (mn < -1e-8)
    throw std::runtime_error("solve_mfg: density went negative beyond slack");

  Ffin = running_field(sol.m);
  Hamiltonian H{p.H.kappa};
  SpaceTimeField rh = hjb_residual(sol.u, Ffin, H);
  SpaceTimeField rf = fp_residual(sol.m, sol.u, H);
  sol.hjb_res = masked_max(rh, mask);
  sol.fp_res = masked_max(rf, mask);
  return sol;
}

}  // namespace

MFGSolution solve_mfg(const MFGProblem& p, const MFGOpts& opts) {
  if (p.inclusion_mask) return solve_with_inclusion(p, opts);
  bool outer_dirichlet = p.bc == BoundaryKind::NeumannDirichletData;
  if (!outer_dirichlet) return solve_core(p, opts, nullptr);
  std::vector<std::uint8_t> mask(p.grid.size(), 0);
  for (long i = 0; i < p.grid.size(); ++i)
    if (p.grid.is_boundary(i)) mask[i] = 1;
  return solve_core(p, opts, &mask);
}

void validate_inclusion_mask(const SpatialGrid& g,
                             const std::vector<std::uint8_t>& mask) {
  if (static_cast<long>(mask.size()) != g.size())
    throw std::invalid_argument("inclusion mask: size mismatch");
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("inclusion mask: box grid required");
  long first_free = -1;
  for (long i = 0; i < g.size(); ++i) {
    if (mask[i] && g.is_boundary(i))
      throw std::invalid_argument("inclusion mask touches the outer boundary");
    if (!mask[i] && first_free < 0) first_free = i;
  }
  if (first_free < 0)
    throw std::invalid_argument("inclusion mask covers the whole domain");
  // flood fill over unmasked nodes
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::deque<long> q{first_free};
  seen[first_free] = 1;
  long reached = 1;
  while (!q.empty()) {
    long idx = q.front();
    q.pop_front();
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    for (int a = 0; a < g.dim; ++a) {
      long stride = 1;
      for (int b = 0; b < a; ++b) stride *= g.n[b];
      for (int s : {-1, +1}) {
        int ni = ijk[a] + s;
        if (ni < 0 || ni >= g.n[a]) continue;
        long nb = idx + s * stride;
        if (seen[nb] || mask[nb]) continue;
        seen[nb] = 1;
        ++reached;
        q.push_back(nb);
      }
    }
  }
  long free_total = 0;
  for (long i = 0; i < g.size(); ++i)
    if (!mask[i]) ++free_total;
  if (reached != free_total)
    throw std::invalid_argument("inclusion mask disconnects the exterior");
}

MFGSolution solve_with_inclusion(const MFGProblem& p, const MFGOpts& opts) {
  if (!p.inclusion_mask) return solve_mfg(p, opts);
  validate_inclusion_mask(p.grid, *p.inclusion_mask);
  std::vector<std::uint8_t> mask = *p.inclusion_mask;
  if (p.bc == BoundaryKind::NeumannDirichletData)
    for (long i = 0; i < p.grid.size(); ++i)
      if (p.grid.is_boundary(i)) mask[i] = 1;
  return solve_core(p, opts, &mask);
}

// ----- stationary ergodic solver -----

namespace {

// principal eigenpair of -2 Lap + V via shifted inverse power iteration;
// the shifted operator is solved by conjugate gradients with a constant
// coefficient spectral preconditioner.
std::pair<double, Field> principal_eigenpair(const SpatialGrid& g,
                                             const Field& V, double tol) {
  double vmin = V[0].real(), vmean = 0.0, vol = 0.0;
  for (long i = 0; i < g.size(); ++i) {
    vmin = std::min(vmin, V[i].real());
    vmean += g.quad_weight(i) * V[i].real();
    vol += g.quad_weight(i);
  }
  vmean /= vol;
  double mu = vmin - 1.0;

  auto apply_A = [&](const Field& x) {
    Field r = cplx(-2.0) * laplacian(x);
    r += hadamard(V, x);
    return r;
  };
  auto apply_shifted = [&](const Field& x) {
    Field r = apply_A(x);
    r -= cplx(mu) * Field(x);
    return r;
  };
  // preconditioner (-2 Lap + (vmean - mu))^{-1}, spectral
  double c0 = vmean - mu;
  auto precond = [&](const Field& r) {
    std::vector<cplx> hat = dft(g, r.v, -1);
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, k;
      g.unindex(idx, i, j, k);
      double s2 = 0.0;
      double m0 = mode_of(i, g.n[0]) / g.side[0];
      s2 += m0 * m0;
      if (g.dim > 1) {
        double m1 = mode_of(j, g.n[1]) / g.side[1];
        s2 += m1 * m1;
      }
      if (g.dim > 2) {
        double m2 = mode_of(k, g.n[2]) / g.side[2];
        s2 += m2 * m2;
      }
      hat[idx] /= (8.0 * std::acos(-1.0) * std::acos(-1.0) * s2 + c0);
    }
    Field out(g);
    out.v = dft(g, hat, +1);
    double inv = 1.0 / g.size();
    for (auto& z : out.v) z *= inv;
    return out;
  };
  auto cg_solve = [&](const Field& b) {
    Field x(g);
    Field r = b;
    Field z = precond(r);
    Field pdir = z;
    cplx rz = dotc(r, z);
    double b2 = std::sqrt(dotc(b, b).real());
    for (int it = 0; it < 800; ++it) {
      Field Ap = apply_shifted(pdir);
      cplx alpha = rz / dotc(pdir, Ap);
      x += alpha * Field(pdir);
      r -= alpha * Field(Ap);
      if (std::sqrt(dotc(r, r).real()) < 1e-14 * (1.0 + b2)) break;
      z = precond(r);
      cplx rz_new = dotc(r, z);
      cplx beta = rz_new / rz;
      rz = rz_new;
      Field np = z;
      np += beta * Field(pdir);
      pdir = std::move(np);
    }
    return x;
  };

  Field x(g, 1.0);
  double lam = 0.0;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 400; ++it) {
    Field y = cg_solve(x);
    double nrm = std::sqrt(dotc(y, y).real());
    y *= 1.0 / nrm;
    Field Ay = apply_A(y);
    lam = (dotc(y, Ay) / dotc(y, y)).real();
    Field res = Ay;
    res -= cplx(lam) * Field(y);
    x = y;
    double rn = std::sqrt(dotc(res, res).real());
    if (rn < tol * (1.0 + std::abs(lam))) break;
    // round-off floor: residuals of the shifted solves stop improving well
    // above machine epsilon because ||A|| ~ 1/h^2
    if (it > 4 && rn > 0.5 * prev_res) {
      if (rn < 1e-8 * (1.0 + std::abs(lam))) break;
      throw std::runtime_error("solve_stationary_ergodic: eigensolver stalled");
    }
    prev_res = rn;
  }
  cplx s = 0.0;
  for (long i = 0; i < g.size(); ++i) s += x[i];
  if (s.real() < 0.0) x *= -1.0;
  for (long i = 0; i < g.size(); ++i)
    if (x[i].real() <= 0.0)
      throw std::runtime_error(
          "solve_stationary_ergodic: principal eigenfunction not positive");
  return {lam, x};
}

}  // namespace

StationarySolution solve_stationary_ergodic(const SpatialGrid& g,
                                            const CostModel& F, double tol) {
  if (g.kind != GridKind::PeriodicTorus)
    throw std::invalid_argument("solve_stationary_ergodic: torus required");
  double vol = 0.0;
  for (long i = 0; i < g.size(); ++i) vol += g.quad_weight(i);

  StationarySolution out;
  Field m(g, 1.0);
  Field u(g);
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    Field V = eval_cost(F, m);
    auto [l, w] = principal_eigenpair(g, V, 1e-11);
    lam = l;
    for (long i = 0; i < g.size(); ++i) u[i] = -2.0 * std::log(w[i].real());
    cplx mean = integrate(u) / vol;
    u -= Field(g, mean);
    Field em(g);
    for (long i = 0; i < g.size(); ++i) em[i] = std::exp(-u[i].real());
    double Z = integrate(em).real();
    em *= 1.0 / Z;
    Field diff = em;
    diff -= m;
    double change = diff.max_abs();
    m = std::move(em);
    out.outer_iters = it + 1;
    if (change < tol) break;
    if (it == 199)
      throw std::runtime_error("solve_stationary_ergodic: outer loop stalled");
  }

  out.lambda = lam;
  out.u = u;
  out.m = m;
  Field Vf = eval_cost(F, m);
  auto gu = gradient(u);
  Field hjb = cplx(-1.0) * laplacian(u);
  for (int a = 0; a < g.dim; ++a) hjb += cplx(0.5) * hadamard(gu[a], gu[a]);
  hjb += Field(g, lam);
  hjb -= Vf;
  out.hjb_res = hjb.max_abs();
  std::vector<Field> flux;
  for (int a = 0; a < g.dim; ++a) flux.push_back(hadamard(m, gu[a]));
  Field fp = cplx(-1.0) * laplacian(m);
  fp -= divergence(flux);
  out.fp_res = fp.max_abs();
  return out;
}

// ----- measurement maps -----

namespace {

void boundary_layout(const SpatialGrid& g, std::vector<long>& nodes,
                     std::vector<double>& weights) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("measure: boundary traces need a box grid");
  for (long idx = 0; idx < g.size(); ++idx) {
    if (!g.is_boundary(idx)) continue;
    nodes.push_back(idx);
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    double w = 0.0;
    for (int a = 0; a < g.dim; ++a) {
      if (ijk[a] != 0 && ijk[a] != g.n[a] - 1) continue;
      double face = 1.0;  // surface quadrature along the face through idx
      for (int b = 0; b < g.dim; ++b) {
        if (b == a) continue;
        double hb = g.h(b);
        face *= (ijk[b] == 0 || ijk[b] == g.n[b] - 1) ? 0.5 * hb : hb;
      }
      w += face;
    }
    weights.push_back(w);
  }
}

BoundaryTrace trace_of(const SpaceTimeField& f, bool normal_deriv) {
  BoundaryTrace tr;
  boundary_layout(f.grid, tr.nodes, tr.weights);
  tr.time = f.time;
  tr.values.resize(static_cast<size_t>(f.time.steps + 1) * tr.nodes.size());
  for (int n = 0; n <= f.time.steps; ++n) {
    Field s = f.slice(n);
    for (size_t b = 0; b < tr.nodes.size(); ++b)
      tr.at(n, b) = normal_deriv ? normal_derivative(s, tr.nodes[b])
                                 : s[tr.nodes[b]];
  }
  return tr;
}

cplx boundary_pairing(const SpaceTimeField& f, const SpaceTimeField& weight,
                      bool normal_deriv) {
  BoundaryTrace tf = trace_of(f, normal_deriv);
  double tau = f.time.tau();
  cplx acc = 0.0;
  for (int n = 0; n <= f.time.steps; ++n) {
    double wt = (n == 0 || n == f.time.steps) ? 0.5 * tau : tau;
    for (size_t b = 0; b < tf.nodes.size(); ++b)
      acc += wt * tf.weights[b] * tf.at(n, b) * weight.at(n, tf.nodes[b]);
  }
  return acc;
}

}  // namespace

BoundaryTrace boundary_values(const SpaceTimeField& f) {
  return trace_of(f, false);
}

BoundaryTrace boundary_normal_derivative(const SpaceTimeField& f) {
  return trace_of(f, true);
}

double BoundaryTrace::l2_distance(const BoundaryTrace& o) const {
  if (nodes != o.nodes || !(time == o.time))
    throw std::invalid_argument("BoundaryTrace: layout mismatch");
  double tau = time.tau();
  double acc = 0.0;
  for (int n = 0; n <= time.steps; ++n) {
    double wt = (n == 0 || n == time.steps) ? 0.5 * tau : tau;
    for (size_t b = 0; b < nodes.size(); ++b) {
      double d = std::abs(at(n, b) - o.at(n, b));
      acc += wt * weights[b] * d * d;
    }
  }
  return std::sqrt(acc);
}

MeasurementRecord measure(const MFGSolution& sol, MeasurementKind kind,
                          const SpaceTimeField* weight) {
  MeasurementRecord rec;
  rec.kind = kind;
  bool periodic = sol.bc == BoundaryKind::Periodic;
  switch (kind) {
    case MeasurementKind::TorusInitialValue:
      if (!periodic)
        throw std::invalid_argument("measure: torus_initial_value needs periodic bc");
      rec.fields.push_back(sol.u.slice(0));
      return rec;
    case MeasurementKind::BoundedPair:
      if (periodic)
        throw std::invalid_argument("measure: bounded_pair needs a box domain");
      rec.traces.push_back(trace_of(sol.u, false));
      rec.fields.push_back(sol.u.slice(0));
      return rec;
    case MeasurementKind::ConstantTerminal:
      rec.fields.push_back(sol.u.slice(0));
      rec.fields.push_back(sol.m.slice(sol.m.time.steps));
      return rec;
    case MeasurementKind::Cauchy:
      if (periodic)
        throw std::invalid_argument("measure: cauchy needs a box domain");
      rec.traces.push_back(trace_of(sol.m, false));
      rec.traces.push_back(trace_of(sol.m, true));
      return rec;
    case MeasurementKind::AnomalyDirichlet:
      if (!weight)
        throw std::invalid_argument("measure: anomaly kinds need a weight");
      rec.scalars.push_back(boundary_pairing(sol.u, *weight, true));
      rec.traces.push_back(trace_of(sol.m, true));
      return rec;
    case MeasurementKind::AnomalyNeumann:
      if (!weight)
        throw std::invalid_argument("measure: anomaly kinds need a weight");
      rec.scalars.push_back(boundary_pairing(sol.u, *weight, false));
      rec.traces.push_back(trace_of(sol.m, false));
      return rec;
  }
  throw std::logic_error("measure: unknown kind");
}

EnergyPairing energy_pairing_check(const MFGSolution& sol, const CostModel& F) {
  const SpatialGrid& g = sol.u.grid;
  const TimeGrid& tg = sol.u.time;
  double tau = tg.tau();
  cplx kinetic = 0.0, rhs = 0.0;
  Field Fn = eval_cost(F, sol.m.slice(0));
  for (int n = 0; n < tg.steps; ++n) {
    Field ubar = cplx(0.5) * (sol.u.slice(n) + sol.u.slice(n + 1));
    Field mbar = cplx(0.5) * (sol.m.slice(n) + sol.m.slice(n + 1));
    Field Fn1 = eval_cost(F, sol.m.slice(n + 1));
    Field Fbar = cplx(0.5) * (Fn + Fn1);
    Fn = std::move(Fn1);
    auto gu = gradient(ubar);
    Field ham(g);
    for (int a = 0; a < g.dim; ++a) ham += hadamard(gu[a], gu[a]);
    ham = hadamard(sol.kappa, ham);
    kinetic += tau * pair(mbar, ham);
    rhs += tau * pair(mbar, Fbar);
  }
  cplx lhs = pair(sol.u.slice(0), sol.m.slice(0)) -
             pair(sol.u.slice(tg.steps), sol.m.slice(tg.steps)) -
             0.5 * kinetic;
  EnergyPairing out;
  out.lhs = lhs.real();
  out.rhs = rhs.real();
  out.gap = std::abs(lhs - rhs);
  return out;
}

}  // namespace mfglab
