#include "mfglab/heat.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>

namespace mfglab {

namespace {

constexpr double pi = std::numbers::pi;

std::vector<double> laplace_symbol(const SpatialGrid& g) {
  std::vector<double> sym(g.size());
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    double x0 = mode_of(i, g.n[0]) / g.side[0];
    double x1 = g.dim > 1 ? mode_of(j, g.n[1]) / g.side[1] : 0.0;
    double x2 = g.dim > 2 ? mode_of(k, g.n[2]) / g.side[2] : 0.0;
    sym[idx] = -4.0 * pi * pi * (x0 * x0 + x1 * x1 + x2 * x2);
  }
  return sym;
}

Field average(const Field& a, const Field& b) {
  Field r(a.grid);
  kernels::active().axpby_c(0.5, a.v.data(), 0.5, b.v.data(), r.v.data(),
                            r.v.size());
  return r;
}

// ----- periodic stepping -----

struct SpectralStepper {
  const SpatialGrid& g;
  double tau;
  std::vector<double> sym;
  explicit SpectralStepper(const SpatialGrid& grid, double tau_)
      : g(grid), tau(tau_), sym(laplace_symbol(grid)) {}

  // solve (2/tau - Lap) wbar = rhs
  Field diag_solve(const Field& rhs) const {
    std::vector<cplx> hat = dft(g, rhs.v, -1);
    for (long i = 0; i < g.size(); ++i) hat[i] /= (2.0 / tau - sym[i]);
    Field out(g);
    out.v = dft(g, hat, +1);
    double s = 1.0 / g.size();
    for (auto& z : out.v) z *= s;
    return out;
  }

  // solve (2/tau - Lap - b.grad - div(. d) - c) wbar = rhs by
  // preconditioned fixed point
  Field solve(const Field& rhs, const std::vector<Field>* b,
              const std::vector<Field>* d, const Field* c,
              const HeatOpts& opts, bool* ok) const {
    Field w = diag_solve(rhs);
    if (!b && !d && !c) {
      if (ok) *ok = true;
      return w;
    }
    Field prev = w;
    for (int it = 0; it < opts.inner_max_iters; ++it) {
      Field r = rhs;
      if (b) {
        auto gr = gradient(w);
        for (int a = 0; a < g.dim; ++a) r += hadamard((*b)[a], gr[a]);
      }
      if (d) {
        std::vector<Field> flux;
        for (int a = 0; a < g.dim; ++a) flux.push_back(hadamard(w, (*d)[a]));
        r += divergence(flux);
      }
      if (c) r += hadamard(*c, w);
      Field next = diag_solve(r);
      Field diff = next - w;
      double change = diff.l2();
      w = std::move(next);
      if (change < opts.inner_tol * (1.0 + w.l2())) {
        if (ok) *ok = true;
        return w;
      }
    }
    if (ok) *ok = false;
    return w;
  }
};

// ----- box stepping (sparse Crank-Nicolson) -----

using SpMat = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

SpMat assemble_box_operator(const SpatialGrid& g, double tau,
                            const std::vector<Field>* drift,
                            const std::vector<Field>* div_drift,
                            const Field* pot,
                            const std::vector<std::uint8_t>* mask) {
  long N = g.size();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(N) * (2 * g.dim + 1));
  auto masked = [&](long idx) { return mask && (*mask)[idx]; };
  for (long idx = 0; idx < N; ++idx) {
    if (masked(idx)) {
      trip.emplace_back(idx, idx, cplx(1.0));
      continue;
    }
    cplx diag = 2.0 / tau;
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    for (int a = 0; a < g.dim; ++a) {
      long stride = 1;
      for (int bx = 0; bx < a; ++bx) stride *= g.n[bx];
      double h = g.h(a);
      int i = ijk[a];
      long up = (i == g.n[a] - 1) ? idx - stride : idx + stride;
      long dn = (i == 0) ? idx + stride : idx - stride;
      // -Laplacian (ghost reflection)
      diag += 2.0 / (h * h);
      trip.emplace_back(idx, up, cplx(-1.0 / (h * h)));
      trip.emplace_back(idx, dn, cplx(-1.0 / (h * h)));
      // -b.grad, centered with reflection
      if (drift) {
        cplx bv = (*drift)[a][idx];
        trip.emplace_back(idx, up, -bv / (2.0 * h));
        trip.emplace_back(idx, dn, bv / (2.0 * h));
      }
      // -div(w d): conservative flux form, zero wall flux (mirrors the
      // divergence() stencil so the trapezoid-weighted mass is conserved)
      if (div_drift) {
        double cell = (i == 0 || i == g.n[a] - 1) ? 0.5 * h : h;
        const Field& dv = (*div_drift)[a];
        if (i < g.n[a] - 1) {
          diag -= 0.5 * dv[idx] / cell;
          trip.emplace_back(idx, idx + stride, -0.5 * dv[idx + stride] / cell);
        }
        if (i > 0) {
          diag += 0.5 * dv[idx] / cell;
          trip.emplace_back(idx, idx - stride, 0.5 * dv[idx - stride] / cell);
        }
      }
    }
    if (pot) diag -= (*pot)[idx];
    trip.emplace_back(idx, idx, diag);
  }
  SpMat M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

struct BoxStepper {
  Eigen::SparseLU<SpMat> lu;
  bool factored = false;
  void factor(const SpMat& M) {
    lu.compute(M);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("solve_heat: singular linear solve (box operator)");
    factored = true;
  }
  Field solve(const Field& rhs) const {
    Eigen::Map<const Eigen::VectorXcd> b(rhs.v.data(), rhs.size());
    Eigen::VectorXcd x = lu.solve(b);
    Field out(rhs.grid);
    Eigen::Map<Eigen::VectorXcd>(out.v.data(), out.size()) = x;
    return out;
  }
};

}  // namespace

HeatTrajectory solve_heat(const HeatProblem& p, const HeatOpts& opts) {
  if (!(p.data.grid == p.grid))
    throw std::invalid_argument("solve_heat: data grid mismatch");
  if (p.source && (!(p.source->grid == p.grid) || !(p.source->time == p.time)))
    throw std::invalid_argument("solve_heat: source grid mismatch");

  // Backward solves run the identical scheme in reversed time.
  if (p.direction == Direction::Backward) {
    HeatProblem q = p;
    q.direction = Direction::Forward;
    SpaceTimeField src_r, pot_r;
    std::vector<SpaceTimeField> drift_r, div_drift_r;
    if (p.source) {
      src_r = p.source->time_reversed();
      q.source = &src_r;
    }
    if (p.potential) {
      pot_r = p.potential->time_reversed();
      q.potential = &pot_r;
    }
    if (p.drift) {
      for (const auto& d : *p.drift) drift_r.push_back(d.time_reversed());
      q.drift = &drift_r;
    }
    if (p.div_drift) {
      for (const auto& d : *p.div_drift) div_drift_r.push_back(d.time_reversed());
      q.div_drift = &div_drift_r;
    }
    HeatTrajectory fwd = solve_heat(q, opts);
    HeatTrajectory out;
    out.w = fwd.w.time_reversed();
    out.direction = Direction::Backward;
    out.residual_max = fwd.residual_max;
    return out;
  }

  const SpatialGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  double tau = tg.tau();
  bool constant_coeff_free =
      !p.source && !p.drift && !p.div_drift && !p.potential;
  bool periodic = g.kind == GridKind::PeriodicTorus;

  SpaceTimeField w(g, tg);
  Field cur = p.data;
  if (p.dirichlet_mask)
    for (long i = 0; i < g.size(); ++i)
      if ((*p.dirichlet_mask)[i]) cur[i] = 0.0;
  w.set_slice(0, cur);

  // Exact spectral propagator for the plain periodic heat flow.
  bool use_exact = periodic && constant_coeff_free && !p.dirichlet_mask &&
                   opts.scheme != HeatOpts::Scheme::CrankNicolson;
  if (use_exact) {
    auto sym = laplace_symbol(g);
    std::vector<cplx> hat = dft(g, cur.v, -1);
    double inv = 1.0 / g.size();
    for (int n = 1; n <= tg.steps; ++n) {
      for (long i = 0; i < g.size(); ++i) hat[i] *= std::exp(sym[i] * tau);
      Field s(g);
      s.v = dft(g, hat, +1);
      for (auto& z : s.v) z *= inv;
      w.set_slice(n, s);
    }
    return {std::move(w), Direction::Forward, 0.0};
  }

  auto slice_or = [&](const SpaceTimeField* f, int n) {
    return f ? f->slice(n) : Field(g);
  };

  std::optional<SpectralStepper> spectral;
  std::optional<BoxStepper> box;
  if (periodic)
    spectral.emplace(g, tau);
  else {
    box.emplace();
    if (!p.drift && !p.div_drift && !p.potential)
      box->factor(assemble_box_operator(g, tau, nullptr, nullptr, nullptr,
                                        p.dirichlet_mask));
  }

  for (int n = 0; n < tg.steps; ++n) {
    // midpoint coefficient fields
    std::vector<Field> bmid, dmid;
    Field cmid;
    bool has_b = p.drift != nullptr, has_d = p.div_drift != nullptr,
         has_c = p.potential != nullptr;
    if (has_b)
      for (int a = 0; a < g.dim; ++a)
        bmid.push_back(average((*p.drift)[a].slice(n), (*p.drift)[a].slice(n + 1)));
    if (has_d)
      for (int a = 0; a < g.dim; ++a)
        dmid.push_back(
            average((*p.div_drift)[a].slice(n), (*p.div_drift)[a].slice(n + 1)));
    if (has_c) cmid = average(p.potential->slice(n), p.potential->slice(n + 1));

    auto linear_solve = [&](const Field& rhs) {
      if (periodic) {
        bool ok = true;
        Field r = spectral->solve(rhs, has_b ? &bmid : nullptr,
                                  has_d ? &dmid : nullptr,
                                  has_c ? &cmid : nullptr, opts, &ok);
        if (!ok)
          throw std::runtime_error(
              "solve_heat: inner fixed point failed to converge");
        return r;
      }
      if (has_b || has_d || has_c)
        box->factor(assemble_box_operator(g, tau, has_b ? &bmid : nullptr,
                                          has_d ? &dmid : nullptr,
                                          has_c ? &cmid : nullptr,
                                          p.dirichlet_mask));
      return box->solve(rhs);
    };

    auto mask_rhs = [&](Field& rhs) {
      if (p.dirichlet_mask)
        for (long i = 0; i < g.size(); ++i)
          if ((*p.dirichlet_mask)[i]) rhs[i] = 0.0;
    };

    Field next(g);
    if (n < opts.rannacher_steps) {
      // two implicit-Euler half steps; same operator as the CN midpoint solve
      Field rhs = (2.0 / tau) * cur + slice_or(p.source, n);
      mask_rhs(rhs);
      Field half = linear_solve(rhs);
      Field rhs2 = (2.0 / tau) * half + slice_or(p.source, n + 1);
      mask_rhs(rhs2);
      next = linear_solve(rhs2);
    } else {
      Field smid = p.source ? average(p.source->slice(n), p.source->slice(n + 1))
                            : Field(g);
      Field rhs = (2.0 / tau) * cur + smid;
      mask_rhs(rhs);
      Field wbar = linear_solve(rhs);
      next = 2.0 * wbar - cur;
    }
    if (p.dirichlet_mask)
      for (long i = 0; i < g.size(); ++i)
        if ((*p.dirichlet_mask)[i]) next[i] = 0.0;
    w.set_slice(n + 1, next);
    cur = std::move(next);
  }

  // midpoint-collocation residual (skips Rannacher start and masked nodes)
  double res = 0.0;
  for (int n = opts.rannacher_steps; n < tg.steps; ++n) {
    Field wa = w.slice(n), wb = w.slice(n + 1);
    Field wbar = average(wa, wb);
    Field r = laplacian(wbar);
    if (p.drift) {
      auto gr = gradient(wbar);
      for (int a = 0; a < g.dim; ++a) {
        Field bm = average((*p.drift)[a].slice(n), (*p.drift)[a].slice(n + 1));
        r += hadamard(bm, gr[a]);
      }
    }
    if (p.div_drift) {
      std::vector<Field> flux;
      for (int a = 0; a < g.dim; ++a)
        flux.push_back(hadamard(
            wbar, average((*p.div_drift)[a].slice(n), (*p.div_drift)[a].slice(n + 1))));
      r += divergence(flux);
    }
    if (p.potential)
      r += hadamard(average(p.potential->slice(n), p.potential->slice(n + 1)), wbar);
    if (p.source) r += average(p.source->slice(n), p.source->slice(n + 1));
    for (long i = 0; i < g.size(); ++i) {
      if (p.dirichlet_mask && (*p.dirichlet_mask)[i]) continue;
      cplx dt = (wb[i] - wa[i]) / tau;
      res = std::max(res, std::abs(dt - r[i]));
    }
  }
  return {std::move(w), Direction::Forward, res};
}

double heat_kernel(const double* x, double t, int n) {
  if (t <= 0.0) throw std::invalid_argument("heat_kernel: t must be positive");
  double r2 = 0.0;
  for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
  return std::pow(4.0 * pi * t, -0.5 * n) * std::exp(-r2 / (4.0 * t));
}

namespace {

// 1D Neumann eigenpairs via the weighted symmetrization D^{1/2} A D^{-1/2}.
std::vector<std::pair<double, std::vector<double>>> eigen_1d(int n, double len) {
  double h = len / (n - 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);  // -Laplacian, reflection
  for (int i = 0; i < n; ++i) {
    int up = (i == n - 1) ? i - 1 : i + 1;
    int dn = (i == 0) ? i + 1 : i - 1;
    A(i, i) += 2.0 / (h * h);
    A(i, up) -= 1.0 / (h * h);
    A(i, dn) -= 1.0 / (h * h);
  }
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
  Eigen::VectorXd ds = d.array().sqrt();
  Eigen::MatrixXd B = ds.asDiagonal() * A * ds.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()));
  std::vector<std::pair<double, std::vector<double>>> out;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd y = es.eigenvectors().col(k);
    Eigen::VectorXd phi = y.cwiseQuotient(ds);  // unit L2 norm in d-weights
    // sign convention: first nonzero entry positive
    for (int i = 0; i < n; ++i)
      if (std::abs(phi(i)) > 1e-10) {
        if (phi(i) < 0) phi = -phi;
        break;
      }
    out.emplace_back(std::max(0.0, es.eigenvalues()(k)),
                     std::vector<double>(phi.data(), phi.data() + n));
  }
  return out;
}

}  // namespace

std::vector<EigenPair> neumann_eigenpairs(const SpatialGrid& g, int count) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("neumann_eigenpairs: neumann-box grid required");
  if (count > g.size())
    throw std::invalid_argument("neumann_eigenpairs: count exceeds grid capacity");
  std::vector<EigenPair> out;
  if (g.dim == 1) {
    auto ev = eigen_1d(g.n[0], g.side[0]);
    for (int k = 0; k < count; ++k) {
      EigenPair ep;
      ep.beta = ev[k].first;
      ep.index = k;
      ep.phi = Field(g);
      for (int i = 0; i < g.n[0]; ++i) ep.phi[i] = ev[k].second[i];
      out.push_back(std::move(ep));
    }
    return out;
  }
  // 2D: tensor products of the per-axis eigenpairs (Kronecker sum)
  auto evx = eigen_1d(g.n[0], g.side[0]);
  auto evy = eigen_1d(g.n[1], g.side[1]);
  struct Item {
    double beta;
    int i, j;
  };
  std::vector<Item> items;
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      items.push_back({evx[i].first + evy[j].first, i, j});
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.beta != b.beta) return a.beta < b.beta;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  for (int k = 0; k < count; ++k) {
    EigenPair ep;
    ep.beta = items[k].beta;
    ep.index = k;
    ep.phi = Field(g);
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, kk;
      g.unindex(idx, i, j, kk);
      ep.phi[idx] = evx[items[k].i].second[i] * evy[items[k].j].second[j];
    }
    out.push_back(std::move(ep));
  }
  return out;
}

Probe probe_torus_heat(const SpatialGrid& g, const TimeGrid& tg,
                       const std::array<int, 3>& xi, double M) {
  if (g.kind != GridKind::PeriodicTorus)
    throw std::invalid_argument("probe_torus_heat: torus grid required");
  double xi2 = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    double f = xi[a] / g.side[a];
    xi2 += f * f;
  }
  double decay = 4.0 * pi * pi * xi2;
  Probe pr;
  pr.w = SpaceTimeField(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double t = tg.t(n);
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, k;
      g.unindex(idx, i, j, k);
      double phase = xi[0] * g.coord(0, i) / g.side[0];
      if (g.dim > 1) phase += xi[1] * g.coord(1, j) / g.side[1];
      if (g.dim > 2) phase += xi[2] * g.coord(2, k) / g.side[2];
      pr.w.at(n, idx) =
          std::exp(cplx(-decay * t, -2.0 * pi * phase)) + cplx(M);
    }
  }
  // spectral residual of the claimed heat solution at sample times
  double res = 0.0;
  for (int n : {0, tg.steps / 2, tg.steps}) {
    Field s = pr.w.slice(n);
    Field lap = laplacian(s);
    for (long i = 0; i < g.size(); ++i)
      res = std::max(res,
                     std::abs(-decay * (s[i] - cplx(M)) - lap[i]));
  }
  pr.residual = res;
  return pr;
}

Probe probe_adjoint_exponential(const SpatialGrid& g, const TimeGrid& tg,
                                const std::array<double, 3>& xi) {
  double xi2 = 0.0;
  for (int a = 0; a < g.dim; ++a) xi2 += xi[a] * xi[a];
  Probe pr;
  pr.w = SpaceTimeField(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double t = tg.t(n);
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, k;
      g.unindex(idx, i, j, k);
      double phase = xi[0] * g.coord(0, i);
      if (g.dim > 1) phase += xi[1] * g.coord(1, j);
      if (g.dim > 2) phase += xi[2] * g.coord(2, k);
      pr.w.at(n, idx) = std::exp(cplx(-xi2 * t, -phase));
    }
  }
  // per-step semigroup consistency of the closed form
  double res = 0.0;
  double factor = std::exp(-xi2 * tg.tau());
  for (int n = 0; n < tg.steps; ++n)
    for (long i = 0; i < g.size(); ++i)
      res = std::max(res, std::abs(pr.w.at(n + 1, i) - factor * pr.w.at(n, i)) /
                              tg.tau());
  pr.residual = res;
  return pr;
}

Probe probe_eigen_mode(const SpatialGrid& g, const TimeGrid& tg, int sign,
                       const EigenPair& ep) {
  if (!(ep.phi.grid == g))
    throw std::invalid_argument("probe_eigen_mode: eigenfunction grid mismatch");
  Field lap = laplacian(ep.phi);
  double eig_res = 0.0;
  for (long i = 0; i < g.size(); ++i)
    eig_res = std::max(eig_res, std::abs(-lap[i] - ep.beta * ep.phi[i]));
  if (eig_res > 1e-6 * (1.0 + ep.beta))
    throw std::invalid_argument("probe_eigen_mode: not an eigenfunction");
  double lambda = sign > 0 ? ep.beta : -ep.beta;
  Probe pr;
  pr.w = SpaceTimeField(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double amp = std::exp(lambda * tg.t(n));
    for (long i = 0; i < g.size(); ++i) pr.w.at(n, i) = amp * ep.phi[i];
  }
  pr.residual = eig_res * std::exp(std::max(0.0, lambda) * tg.T);
  return pr;
}

}  // namespace mfglab
