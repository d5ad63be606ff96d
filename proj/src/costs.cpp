#include "mfglab/costs.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mfglab {
namespace {
constexpr double kPi = std::numbers::pi;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void zero_boundary(Field& f) {
  if (f.grid.kind != GridKind::NeumannBox) return;
  for (long i = 0; i < f.size(); ++i)
    if (f.grid.is_boundary(i)) f[i] = 0.0;
}
}  // namespace

double PowerSeriesCost::tail_bound(double r) const {
  // Dropped terms are extrapolated geometrically from the listed
  // coefficients: with c_k = |U_k|/k!, anchor at the last nonzero c and use
  // the worst consecutive ratio as the growth factor. A polynomial cost
  // (trailing zero coefficients) has zero tail.
  int K = static_cast<int>(coeff.size());
  std::vector<double> c(K);
  int last = 0;  // 1-based index of the last nonzero coefficient
  for (int k = 1; k <= K; ++k) {
    c[k - 1] = coeff[k - 1].max_abs() / factorial(k);
    if (c[k - 1] > 0.0) last = k;
  }
  if (last == 0 || last < K) return 0.0;
  double q = last == 1 ? c[0] : 0.0;
  for (int k = 2; k <= last; ++k) {
    if (c[k - 2] == 0.0) {
      if (c[k - 1] > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    q = std::max(q, c[k - 1] / c[k - 2]);
  }
  double x = q * r;
  if (x >= 1.0) return std::numeric_limits<double>::infinity();
  return c[last - 1] * std::pow(r, last) *
         std::pow(x, static_cast<double>(K + 1 - last)) / (1.0 - x);
}

double NonlocalKernelCost::mean_zero_defect() const {
  long sz = grid.size();
  double worst = 0.0;
  for (long x = 0; x < sz; ++x) {
    double row = 0.0;
    for (long y = 0; y < sz; ++y) row += grid.quad_weight(y) * at(x, y);
    worst = std::max(worst, std::abs(row));
  }
  return worst;
}

Hamiltonian Hamiltonian::constant(const SpatialGrid& g, double k) {
  Hamiltonian H;
  H.kappa = Field(g, k);
  return H;
}

void Hamiltonian::validate() const {
  for (long i = 0; i < kappa.size(); ++i)
    if (kappa[i].real() <= 0.0)
      throw std::invalid_argument("Hamiltonian: kappa must be positive");
}

Field eval_cost(const PowerSeriesCost& c, const Field& m) {
  Field out(m.grid);
  int K = static_cast<int>(c.coeff.size());
  for (long i = 0; i < m.size(); ++i) {
    cplx z = m[i] - c.base;
    if (std::abs(z) > c.radius + 1e-14)
      throw std::runtime_error("eval_cost: evaluation radius exceeded");
    cplx acc = 0.0;  // sum U_k z^{k-1}/k!, Horner
    for (int k = K; k >= 1; --k)
      acc = c.coeff[k - 1][i] / factorial(k) + z * acc;
    out[i] = z * acc;
  }
  return out;
}

Field eval_cost(const NonlocalKernelCost& c, const Field& m) {
  if (m.grid != c.grid)
    throw std::invalid_argument("eval_cost: grid mismatch");
  if (c.mean_zero_defect() > 1e-10)
    throw std::runtime_error("eval_cost: kernel violates the mean-zero constraint");
  long sz = c.grid.size();
  Field out(c.grid);
  for (long x = 0; x < sz; ++x) {
    cplx acc = 0.0;
    for (long y = 0; y < sz; ++y)
      acc += c.grid.quad_weight(y) * c.at(x, y) * m[y];
    out[x] = acc;
  }
  return out;
}

Field eval_cost(const CostModel& c, const Field& m) {
  return std::visit([&](const auto& cc) { return eval_cost(cc, m); }, c);
}

Field eval_cost_derivative(const PowerSeriesCost& c, const Field& m) {
  Field out(m.grid);
  int K = static_cast<int>(c.coeff.size());
  for (long i = 0; i < m.size(); ++i) {
    cplx z = m[i] - c.base;
    cplx acc = 0.0;
    for (int k = K; k >= 1; --k)
      acc = c.coeff[k - 1][i] / factorial(k - 1) + z * acc;
    out[i] = acc;
  }
  return out;
}

Field hamiltonian_value(const Hamiltonian& H, const std::vector<Field>& p) {
  Field out(H.kappa.grid);
  for (const Field& pi : p) out += hadamard(pi, pi);
  out = hadamard(cplx(0.5) * Field(H.kappa), out);
  return out;
}

namespace {
template <typename RunningCostAt>
SpaceTimeField hjb_residual_impl(const SpaceTimeField& u, const Hamiltonian& H,
                                 RunningCostAt&& F_mid) {
  SpaceTimeField r(u.grid, u.time);
  double tau = u.time.tau();
  for (int n = 0; n < u.time.steps; ++n) {
    Field un = u.slice(n), un1 = u.slice(n + 1);
    Field ubar = cplx(0.5) * (un + un1);
    Field res = cplx(-1.0 / tau) * (un1 - un);
    res -= laplacian(ubar);
    res += hamiltonian_value(H, gradient(ubar));
    res -= F_mid(n);
    zero_boundary(res);
    r.set_slice(n, res);
  }
  return r;
}
}  // namespace

SpaceTimeField hjb_residual(const SpaceTimeField& u, const SpaceTimeField& m,
                            const CostModel& F, const Hamiltonian& H) {
  return hjb_residual_impl(u, H, [&](int n) {
    Field mbar = cplx(0.5) * (m.slice(n) + m.slice(n + 1));
    return eval_cost(F, mbar);
  });
}

SpaceTimeField hjb_residual(const SpaceTimeField& u,
                            const SpaceTimeField& F_of_xt,
                            const Hamiltonian& H) {
  return hjb_residual_impl(u, H, [&](int n) {
    return cplx(0.5) * (F_of_xt.slice(n) + F_of_xt.slice(n + 1));
  });
}

SpaceTimeField fp_residual(const SpaceTimeField& m, const SpaceTimeField& u,
                           const Hamiltonian& H) {
  SpaceTimeField r(m.grid, m.time);
  double tau = m.time.tau();
  for (int n = 0; n < m.time.steps; ++n) {
    Field mn = m.slice(n), mn1 = m.slice(n + 1);
    Field mbar = cplx(0.5) * (mn + mn1);
    Field ubar = cplx(0.5) * (u.slice(n) + u.slice(n + 1));
    std::vector<Field> flux = gradient(ubar);
    for (Field& fi : flux) fi = hadamard(mbar, hadamard(H.kappa, fi));
    Field res = cplx(1.0 / tau) * (mn1 - mn);
    res -= laplacian(mbar);
    res -= divergence(flux);
    zero_boundary(res);
    r.set_slice(n, res);
  }
  return r;
}

double ClosedFormVector::hjb_residual_max() const {
  return hjb_residual(u, F, H).max_abs();
}

double ClosedFormVector::fp_residual_max() const {
  if (!has_m) return 0.0;
  return fp_residual(m, u, H).max_abs();
}

std::vector<ClosedFormVector> closed_form_library(int nx, int steps) {
  std::vector<ClosedFormVector> lib;
  double T = 0.5;

  {  // the trivial equilibrium (u, m) = (0, 1) with F = 0
    ClosedFormVector v;
    v.name = "trivial";
    v.domain_tag = "torus";
    v.grid = SpatialGrid::torus(1, nx);
    v.time = {T, steps};
    v.u = SpaceTimeField(v.grid, v.time);
    v.has_m = true;
    v.m = SpaceTimeField(v.grid, v.time, 1.0);
    v.F = SpaceTimeField(v.grid, v.time);
    v.G = Field(v.grid);
    v.H = Hamiltonian::constant(v.grid);
    lib.push_back(std::move(v));
  }

  // u_j = s (e^t - 1) sin x on the 2pi-torus, s = +1 / -1: both members
  // vanish at t = 0, so the initial-value measurement cannot tell them apart.
  for (double s : {1.0, -1.0}) {
    ClosedFormVector v;
    v.name = s > 0 ? "exp-sine-plus" : "exp-sine-minus";
    v.domain_tag = "torus";
    v.grid = SpatialGrid::torus(1, nx, 2.0 * kPi);
    v.time = {T, steps};
    v.u = sample_spacetime(v.grid, v.time, [&](double x, double t) {
      return s * (std::exp(t) - 1.0) * std::sin(x);
    });
    v.F = sample_spacetime(v.grid, v.time, [&](double x, double t) {
      double e = std::exp(t) - 1.0;
      return -s * std::sin(x) + 0.5 * e * e * std::cos(x) * std::cos(x);
    });
    v.G = sample(v.grid, [&](double x) {
      return s * (std::exp(T) - 1.0) * std::sin(x);
    });
    v.H = Hamiltonian::constant(v.grid);
    lib.push_back(std::move(v));
  }

  // u_j = j x t(t - T) on [0,1], j = 1, 2: again u_j(., 0) = u_j(., T) = 0.
  for (int j : {1, 2}) {
    ClosedFormVector v;
    v.name = j == 1 ? "poly-drift-1" : "poly-drift-2";
    v.domain_tag = "box";
    v.grid = SpatialGrid::box(1, nx);
    v.time = {T, steps};
    v.u = sample_spacetime(v.grid, v.time, [&](double x, double t) {
      return j * x * t * (t - T);
    });
    v.F = sample_spacetime(v.grid, v.time, [&](double x, double t) {
      double q = t * (t - T);
      return -j * x * (2.0 * t - T) + 0.5 * j * j * q * q;
    });
    v.G = Field(v.grid);
    v.H = Hamiltonian::constant(v.grid);
    lib.push_back(std::move(v));
  }

  {  // stationary ergodic pair: u = a cos 2 pi x, m = e^{-u}/Int e^{-u}
    ClosedFormVector v;
    v.name = "ergodic";
    v.domain_tag = "torus-stationary";
    v.grid = SpatialGrid::torus(1, nx);
    v.time = {T, steps};
    double a = 0.5;
    Field us = sample(v.grid, [&](double x) { return a * std::cos(2 * kPi * x); });
    Field em = sample(v.grid, [&](double x) { return std::exp(-a * std::cos(2 * kPi * x)); });
    double Z = integrate(em).real();
    v.u = SpaceTimeField(v.grid, v.time);
    v.m = SpaceTimeField(v.grid, v.time);
    v.has_m = true;
    for (int n = 0; n <= steps; ++n) {
      v.u.set_slice(n, us);
      v.m.set_slice(n, cplx(1.0 / Z) * Field(em));
    }
    v.F = sample_spacetime(v.grid, v.time, [&](double x, double) {
      double s2 = std::sin(2 * kPi * x);
      return 4 * kPi * kPi * a * std::cos(2 * kPi * x) +
             2 * kPi * kPi * a * a * s2 * s2;
    });
    v.G = us;
    v.H = Hamiltonian::constant(v.grid);
    lib.push_back(std::move(v));
  }

  return lib;
}

}  // namespace mfglab
