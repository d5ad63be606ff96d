#include "mfglab/ops.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace mfglab {

namespace {
std::mutex fftw_mutex;  // FFTW planner is not thread-safe
constexpr double two_pi = 2.0 * std::numbers::pi;

void require_periodic(const SpatialGrid& g, const char* op) {
  if (g.kind != GridKind::PeriodicTorus)
    throw std::invalid_argument(std::string(op) + ": periodic grid required");
}
}  // namespace

std::vector<cplx> dft(const SpatialGrid& g, const std::vector<cplx>& in, int sign) {
  require_periodic(g, "dft");
  std::vector<cplx> out(in.size());
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    // x-fastest layout == row-major with dims reversed
    if (g.dim == 1)
      plan = fftw_plan_dft_1d(g.n[0], src, dst, sign, FFTW_ESTIMATE);
    else if (g.dim == 2)
      plan = fftw_plan_dft_2d(g.n[1], g.n[0], src, dst, sign, FFTW_ESTIMATE);
    else
      plan = fftw_plan_dft_3d(g.n[2], g.n[1], g.n[0], src, dst, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

cplx FourierTable::coeff(int kx, int ky, int kz) const {
  auto wrap = [](int k, int n) { return ((k % n) + n) % n; };
  return c[grid.index(wrap(kx, grid.n[0]), wrap(ky, grid.n[1]),
                      wrap(kz, grid.n[2]))];
}

FourierTable fourier_coeffs(const Field& f) {
  require_periodic(f.grid, "fourier_coeffs");
  FourierTable t;
  t.grid = f.grid;
  t.c = dft(f.grid, f.v, FFTW_FORWARD);
  double w = 1.0;
  for (int a = 0; a < f.grid.dim; ++a) w *= f.grid.h(a);
  for (auto& z : t.c) z *= w;  // rectangle rule: coeff = h^d * DFT
  return t;
}

Field inverse_fourier(const FourierTable& t) {
  Field f(t.grid);
  f.v = dft(t.grid, t.c, FFTW_BACKWARD);
  double vol = 1.0;
  for (int a = 0; a < t.grid.dim; ++a) vol *= t.grid.side[a];
  for (auto& z : f.v) z /= vol;
  return f;
}

namespace {

// Apply a spectral symbol sym(xi) where xi_a = mode_a / side_a.
Field apply_symbol(const Field& f,
                   const std::function<cplx(double, double, double)>& sym) {
  const SpatialGrid& g = f.grid;
  std::vector<cplx> hat = dft(g, f.v, FFTW_FORWARD);
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    double x0 = mode_of(i, g.n[0]) / g.side[0];
    double x1 = g.dim > 1 ? mode_of(j, g.n[1]) / g.side[1] : 0.0;
    double x2 = g.dim > 2 ? mode_of(k, g.n[2]) / g.side[2] : 0.0;
    hat[idx] *= sym(x0, x1, x2);
  }
  Field out(g);
  out.v = dft(g, hat, FFTW_BACKWARD);
  double scale = 1.0 / g.size();
  for (auto& z : out.v) z *= scale;
  return out;
}

// Centered 1D second difference with ghost reflection along one axis.
void axis_laplacian_neumann(const Field& f, int axis, Field& acc) {
  const SpatialGrid& g = f.grid;
  double h2 = g.h(axis) * g.h(axis);
  long stride = 1;
  for (int a = 0; a < axis; ++a) stride *= g.n[a];
  int na = g.n[axis];
  for (long idx = 0; idx < g.size(); ++idx) {
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    int i = ijk[axis];
    cplx up = (i == na - 1) ? f[idx - stride] : f[idx + stride];
    cplx dn = (i == 0) ? f[idx + stride] : f[idx - stride];
    acc[idx] += (up - 2.0 * f[idx] + dn) / h2;
  }
}

void axis_gradient_neumann(const Field& f, int axis, Field& out) {
  const SpatialGrid& g = f.grid;
  double h = g.h(axis);
  long stride = 1;
  for (int a = 0; a < axis; ++a) stride *= g.n[a];
  int na = g.n[axis];
  for (long idx = 0; idx < g.size(); ++idx) {
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    int i = ijk[axis];
    // reflection: gradient vanishes at the wall (zero-flux representation)
    cplx up = (i == na - 1) ? f[idx - stride] : f[idx + stride];
    cplx dn = (i == 0) ? f[idx + stride] : f[idx - stride];
    out[idx] = (up - dn) / (2.0 * h);
  }
}

// Conservative flux-form divergence contribution of one axis: zero flux at
// the walls, so the trapezoid-weighted column sums vanish exactly.
void axis_divergence_neumann(const Field& comp, int axis, Field& acc) {
  const SpatialGrid& g = comp.grid;
  double h = g.h(axis);
  long stride = 1;
  for (int a = 0; a < axis; ++a) stride *= g.n[a];
  int na = g.n[axis];
  for (long idx = 0; idx < g.size(); ++idx) {
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    int i = ijk[axis];
    cplx flux_up = (i == na - 1) ? cplx(0.0) : 0.5 * (comp[idx] + comp[idx + stride]);
    cplx flux_dn = (i == 0) ? cplx(0.0) : 0.5 * (comp[idx] + comp[idx - stride]);
    double cell = (i == 0 || i == na - 1) ? 0.5 * h : h;
    acc[idx] += (flux_up - flux_dn) / cell;
  }
}

}  // namespace

Field laplacian(const Field& f) {
  if (f.grid.kind == GridKind::PeriodicTorus) {
    return apply_symbol(f, [](double x0, double x1, double x2) {
      return cplx(-4.0 * std::numbers::pi * std::numbers::pi *
                  (x0 * x0 + x1 * x1 + x2 * x2));
    });
  }
  Field acc(f.grid);
  for (int a = 0; a < f.grid.dim; ++a) axis_laplacian_neumann(f, a, acc);
  return acc;
}

std::vector<Field> gradient(const Field& f) {
  std::vector<Field> out;
  const SpatialGrid& g = f.grid;
  for (int a = 0; a < g.dim; ++a) {
    if (g.kind == GridKind::PeriodicTorus) {
      out.push_back(apply_symbol(f, [a, &g](double x0, double x1, double x2) {
        double xi[3] = {x0, x1, x2};
        // odd symbol: drop the unmatched Nyquist mode
        int kny = g.n[a] / 2;
        if (g.n[a] % 2 == 0 && std::abs(xi[a] * g.side[a] - kny) < 0.5)
          return cplx(0.0);
        return cplx(0.0, two_pi * xi[a]);
      }));
    } else {
      Field comp(g);
      axis_gradient_neumann(f, a, comp);
      out.push_back(std::move(comp));
    }
  }
  return out;
}

Field divergence(const std::vector<Field>& vfield) {
  if (vfield.empty()) throw std::invalid_argument("divergence: empty vector field");
  const SpatialGrid& g = vfield[0].grid;
  if (static_cast<int>(vfield.size()) != g.dim)
    throw std::invalid_argument("divergence: component count != dim");
  Field acc(g);
  for (int a = 0; a < g.dim; ++a) {
    if (g.kind == GridKind::PeriodicTorus) {
      acc += apply_symbol(vfield[a], [a, &g](double x0, double x1, double x2) {
        double xi[3] = {x0, x1, x2};
        int kny = g.n[a] / 2;
        if (g.n[a] % 2 == 0 && std::abs(xi[a] * g.side[a] - kny) < 0.5)
          return cplx(0.0);
        return cplx(0.0, two_pi * xi[a]);
      });
    } else {
      axis_divergence_neumann(vfield[a], a, acc);
    }
  }
  return acc;
}

cplx normal_derivative(const Field& f, long idx) {
  const SpatialGrid& g = f.grid;
  if (g.kind != GridKind::NeumannBox || !g.is_boundary(idx))
    throw std::invalid_argument("normal_derivative: boundary node of a box required");
  int ijk[3];
  g.unindex(idx, ijk[0], ijk[1], ijk[2]);
  // one-sided O(h^2): (3f0 - 4f1 + f2) / (2h) pointing outward
  for (int a = 0; a < g.dim; ++a) {
    long stride = 1;
    for (int b = 0; b < a; ++b) stride *= g.n[b];
    if (ijk[a] == 0)
      return (3.0 * f[idx] - 4.0 * f[idx + stride] + f[idx + 2 * stride]) /
             (2.0 * g.h(a));
    if (ijk[a] == g.n[a] - 1)
      return (3.0 * f[idx] - 4.0 * f[idx - stride] + f[idx - 2 * stride]) /
             (2.0 * g.h(a));
  }
  throw std::logic_error("normal_derivative: unreachable");
}

cplx integrate(const Field& f) {
  cplx s = 0.0;
  for (long i = 0; i < f.size(); ++i) s += f.grid.quad_weight(i) * f[i];
  return s;
}

cplx pair(const Field& f, const Field& g) {
  if (!(f.grid == g.grid)) throw std::invalid_argument("pair: grid mismatch");
  cplx s = 0.0;
  for (long i = 0; i < f.size(); ++i) s += f.grid.quad_weight(i) * f[i] * g[i];
  return s;
}

cplx pair_spacetime(const SpaceTimeField& f, const SpaceTimeField& g) {
  if (!(f.grid == g.grid) || !(f.time == g.time))
    throw std::invalid_argument("pair_spacetime: grid mismatch");
  cplx s = 0.0;
  double tau = f.time.tau();
  for (int n = 0; n <= f.time.steps; ++n) {
    double wt = (n == 0 || n == f.time.steps) ? 0.5 * tau : tau;
    cplx sp = 0.0;
    for (long i = 0; i < f.grid.size(); ++i)
      sp += f.grid.quad_weight(i) * f.at(n, i) * g.at(n, i);
    s += wt * sp;
  }
  return s;
}

double wasserstein1_1d(const Field& m1, const Field& m2, double mass_tol) {
  if (m1.grid.dim != 1 || !(m1.grid == m2.grid))
    throw std::invalid_argument("wasserstein1_1d: matching 1D grids required");
  cplx a1 = integrate(m1), a2 = integrate(m2);
  if (std::abs(a1 - a2) > mass_tol)
    throw std::invalid_argument("wasserstein1_1d: mass mismatch");
  const SpatialGrid& g = m1.grid;
  long n = g.size();
  // cumulative quadrature of the difference, then integrate |CDF1-CDF2|
  std::vector<double> cdf(n, 0.0);
  double h = g.h(0);
  bool box = g.kind == GridKind::NeumannBox;
  double run = 0.0;
  for (long i = 0; i < n; ++i) {
    double d = m1[i].real() - m2[i].real();
    if (box) {
      if (i > 0) {
        double dprev = m1[i - 1].real() - m2[i - 1].real();
        run += 0.5 * h * (d + dprev);
      }
      cdf[i] = run;
    } else {
      run += h * d;
      cdf[i] = run;
    }
  }
  double w = 0.0;
  for (long i = 0; i < n; ++i) w += g.quad_weight(i) * std::abs(cdf[i]);
  return w;
}

}  // namespace mfglab
