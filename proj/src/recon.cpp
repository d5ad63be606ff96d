// Coefficient reconstruction from measurement data. Each routine turns
// probe measurements into linear systems through duality with heat-flow
// test functions, then inverts those systems (2x2 per Fourier mode on the
// torus, cosine-moment systems from discrete heat tests on a box).
#include "mfglab/recon.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mfglab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// e^{sign 2 pi i zeta.x/L} sampled on the grid (zeta in integer mode units)
Field mode_exp(const SpatialGrid& g, const std::array<int, 3>& zeta,
               double sign) {
  Field out(g);
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    int iv[3] = {i, j, k};
    double phase = 0.0;
    for (int a = 0; a < g.dim; ++a)
      phase += zeta[a] * g.coord(a, iv[a]) / g.side[a];
    out[idx] = std::exp(cplx(0.0, sign * 2.0 * kPi * phase));
  }
  return out;
}

// squared frequency |zeta/L|^2 of an integer mode (heat decay 4 pi^2 s)
double mode_s(const SpatialGrid& g, const std::array<int, 3>& z) {
  double s = 0.0;
  for (int a = 0; a < g.dim; ++a) s += double(z[a]) * z[a] / (g.side[a] * g.side[a]);
  return s;
}

Field scaled(const Field& f, cplx a) {
  Field out = f;
  out *= a;
  return out;
}

// singular values of a real 2x2 matrix
void svd2(double a, double b, double c, double d, double& smax, double& smin) {
  double q = a * a + b * b + c * c + d * d;
  double det = a * d - b * c;
  double disc = std::sqrt(std::max(0.0, q * q - 4.0 * det * det));
  smax = std::sqrt(std::max(0.0, (q + disc) / 2.0));
  smin = std::sqrt(std::max(0.0, (q - disc) / 2.0));
}

void trace_axpy(cplx c, const BoundaryTrace& x, BoundaryTrace& y) {
  for (size_t i = 0; i < y.values.size(); ++i) y.values[i] += c * x.values[i];
}

CauchyData cd_axpy(cplx a, const CauchyData& x, cplx b, const CauchyData& y) {
  CauchyData out = x;
  out.u0 *= a;
  out.u0 += scaled(y.u0, b);
  for (auto& z : out.u_boundary.values) z *= a;
  for (auto& z : out.du_boundary.values) z *= a;
  trace_axpy(b, y.u_boundary, out.u_boundary);
  trace_axpy(b, y.du_boundary, out.du_boundary);
  return out;
}

// all integer modes with |k_a| <= cutoff on the first `dim` axes and
// within the representable range of the grid
std::vector<std::array<int, 3>> mode_box(const SpatialGrid& g, int cutoff) {
  std::array<int, 3> lim{0, 0, 0};
  for (int a = 0; a < g.dim; ++a)
    lim[a] = std::min(cutoff, (g.n[a] - 1) / 2);
  std::vector<std::array<int, 3>> out;
  for (int kx = -lim[0]; kx <= lim[0]; ++kx)
    for (int ky = -lim[1]; ky <= lim[1]; ++ky)
      for (int kz = -lim[2]; kz <= lim[2]; ++kz)
        out.push_back({kx, ky, kz});
  return out;
}

// nonnegative cosine multi-indices with k_a in [0, cutoff] per axis
std::vector<std::array<int, 3>> cos_modes(const SpatialGrid& g, int cutoff) {
  std::array<int, 3> lim{0, 0, 0};
  for (int a = 0; a < g.dim; ++a) lim[a] = std::min(cutoff, g.n[a] - 1);
  std::vector<std::array<int, 3>> out;
  for (int kx = 0; kx <= lim[0]; ++kx)
    for (int ky = 0; ky <= lim[1]; ++ky)
      for (int kz = 0; kz <= lim[2]; ++kz) out.push_back({kx, ky, kz});
  return out;
}

// product cosine basis function prod_a cos(pi k_a x_a / L_a); each one,
// sampled on the box grid, is an exact eigenvector of the discrete
// Neumann Laplacian
Field cos_basis(const SpatialGrid& g, const std::array<int, 3>& k) {
  Field out(g);
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, l;
    g.unindex(idx, i, j, l);
    int iv[3] = {i, j, l};
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a)
      v *= std::cos(kPi * k[a] * g.coord(a, iv[a]) / g.side[a]);
    out[idx] = v;
  }
  return out;
}

// Heat evolution of a cosine mode under the same Crank-Nicolson Neumann
// scheme that produced the measurements. For any field U obeying the
// discrete backward equation -dU/tau = -A Ubar + Sbar with U(T) = 0, the
// steps telescope exactly against such a test w:
//   sum_n tau (Sbar_n, wbar_n) = (U(0), w(0)),
// so duality rows built this way carry no time-quadrature error.
SpaceTimeField cos_test(const SpatialGrid& g, const TimeGrid& tg,
                        const std::array<int, 3>& k) {
  HeatProblem hp;
  hp.grid = g;
  hp.time = tg;
  hp.direction = Direction::Forward;
  hp.data = cos_basis(g, k);
  return solve_heat(hp).w;
}

// time-integrated test weight sum_n tau theta[n] (w_n + w_{n+1})/2 for a
// source with per-interval midpoint profile theta
Field test_weight(const SpaceTimeField& w, const std::vector<double>& theta) {
  double tau = w.time.tau();
  Field out(w.grid, 0.0);
  for (int n = 0; n < w.time.steps; ++n) {
    Field mid = w.slice(n);
    mid += w.slice(n + 1);
    out += scaled(mid, 0.5 * tau * theta[n]);
  }
  return out;
}

// Solve the moment system sum_k a_k (basis_k, W_r) = b_r for the cosine
// coefficients a_k and return the nodal field sum_k a_k basis_k.
Field solve_basis(const SpatialGrid& g, const std::vector<Field>& basis,
                  const std::vector<Field>& weights,
                  const std::vector<double>& b) {
  long R = static_cast<long>(weights.size());
  long K = static_cast<long>(basis.size());
  Eigen::MatrixXd A(R, K);
  Eigen::VectorXd rhs(R);
  for (long r = 0; r < R; ++r) {
    for (long k = 0; k < K; ++k) A(r, k) = pair(basis[k], weights[r]).real();
    rhs(r) = b[r];
  }
  Eigen::VectorXd a = A.colPivHouseholderQr().solve(rhs);
  Field out(g, 0.0);
  for (long k = 0; k < K; ++k) out += scaled(basis[k], a(k));
  return out;
}

// per-step Crank-Nicolson decay factor of a Laplacian eigenmode -Lap phi =
// beta phi
double cn_decay(double beta, double tau) {
  return (1.0 - beta * tau / 2.0) / (1.0 + beta * tau / 2.0);
}

// squared gradient magnitude (fields are real in our probes)
Field grad_sq(const Field& f) {
  std::vector<Field> gr = gradient(f);
  Field out(f.grid, 0.0);
  for (const auto& c : gr) out += hadamard(c, c);
  return out;
}

}  // namespace

// --------------------------------------------------------- torus F and G

double fg_coeff_A(double s, double T) {
  double r = 4.0 * kPi * kPi * s;
  if (r * T < 1e-12) return T;
  return -std::expm1(-r * T) / r;
}

double fg_coeff_B(double s, double T) {
  return std::exp(-4.0 * kPi * kPi * s * T);
}

namespace {

struct FGContext {
  const TorusOracle* oracle;
  SpatialGrid g;
  TimeGrid tg;
  double eps;
  // probe cache: key = (zeta1, M1, zeta2, M2, eps-halving level); single
  // probes use M2 = -1 as the sentinel
  std::map<std::array<int, 9>, Field> cache;

  const Field& probe_value(const std::array<int, 3>& z1, int M1,
                           const std::array<int, 3>& z2, int M2, int lvl) {
    std::array<int, 9> key{z1[0], z1[1], z1[2], M1,
                           z2[0], z2[1], z2[2], M2, lvl};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Field m0 = mode_exp(g, z1, -1.0);
    for (long i = 0; i < m0.size(); ++i) m0[i] += double(M1);
    if (M2 >= 0) {
      Field f2 = mode_exp(g, z2, -1.0);
      for (long i = 0; i < m0.size(); ++i) m0[i] += f2[i] + double(M2);
    }
    m0 *= eps / std::pow(2.0, lvl);
    return cache.emplace(key, (*oracle)(m0)).first->second;
  }

  // first derivative of the data map along e^{-2 pi i zeta.x}: offsets
  // removed by exact subtraction, one-sided Richardson in eps
  Field u1_of(const std::array<int, 3>& zeta) {
    std::array<int, 3> none{0, 0, 0};
    auto d1 = [&](int M) {
      double e = eps;
      Field a = probe_value(zeta, M, none, -1, 1);  // eps/2
      Field b = probe_value(zeta, M, none, -1, 0);  // eps
      a *= 4.0;
      a -= b;
      a *= 1.0 / e;
      return a;
    };
    Field u1 = d1(1);
    u1 *= 2.0;
    u1 -= d1(2);
    return u1;
  }

  // mixed second derivative along (e^{-2 pi i z1.x}, e^{-2 pi i z2.x}),
  // offsets removed by the bilinear four-point combination
  Field u_mixed(const std::array<int, 3>& z1, const std::array<int, 3>& z2) {
    std::array<int, 3> none{0, 0, 0};
    auto dh = [&](int lvl) {
      double e = eps / std::pow(2.0, lvl);
      Field acc(g, 0.0);
      const double comb[2][2] = {{4.0, -2.0}, {-2.0, 1.0}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          int M1 = i + 1, M2 = j + 1;
          Field d = probe_value(z1, M1, z2, M2, lvl);
          d -= probe_value(z1, M1, none, -1, lvl);
          d -= probe_value(z2, M2, none, -1, lvl);
          d *= comb[i][j] / (e * e);
          acc += d;
        }
      return acc;
    };
    Field u2 = dh(1);
    u2 *= 2.0;
    u2 -= dh(0);
    return u2;
  }
};

}  // namespace

TorusFGResult recover_FG_torus(const TorusOracle& oracle, const SpatialGrid& g,
                               const TimeGrid& tg, int K_max, int mode_cutoff,
                               double eps) {
  if (g.kind != GridKind::PeriodicTorus)
    throw std::invalid_argument("recover_FG_torus: torus grid required");
  if (K_max < 1 || K_max > 2)
    throw std::invalid_argument("recover_FG_torus: K_max must be 1 or 2");
  FGContext ctx{&oracle, g, tg, eps, {}};
  const double T = tg.T;

  auto probe_split = [&](const std::array<int, 3>& xi) {
    // second system (xi - e, e) with an axis unit e such that xi.e != 1,
    // so the two probe sums s differ
    std::array<int, 3> e{0, 0, 0};
    int axis = 0, sign = 1;
    for (int a = 0; a < g.dim; ++a)
      if (xi[a] != 1) {
        axis = a;
        sign = 1;
        break;
      }
    if (xi[axis] == 1) sign = -1;  // all components equal one
    e[axis] = sign;
    return e;
  };

  std::vector<std::array<int, 3>> targets = mode_box(g, mode_cutoff);
  TorusFGResult out;
  std::map<std::array<int, 3>, Field> u1_cache;
  auto u1_of = [&](const std::array<int, 3>& z) -> const Field& {
    auto it = u1_cache.find(z);
    if (it != u1_cache.end()) return it->second;
    return u1_cache.emplace(z, ctx.u1_of(z)).first->second;
  };

  // ----- order one -----
  FourierTable Ft, Gt;
  Ft.grid = g;
  Ft.c.assign(g.size(), 0.0);
  Gt = Ft;
  auto wrap_slot = [&](const std::array<int, 3>& k) {
    auto w = [&](int kk, int n) { return ((kk % n) + n) % n; };
    return g.index(w(k[0], g.n[0]), w(k[1], g.n[1]), w(k[2], g.n[2]));
  };

  for (const auto& xi : targets) {
    std::array<int, 3> e = probe_split(xi);
    std::array<int, 3> xie{xi[0] - e[0], xi[1] - e[1], xi[2] - e[2]};
    double s1 = mode_s(g, xi);
    double s2 = mode_s(g, xie) + mode_s(g, e);
    cplx d1 = pair(u1_of(xi), Field(g, 1.0));
    cplx d2 = pair(u1_of(xie), mode_exp(g, e, -1.0));
    double A1 = fg_coeff_A(s1, T), B1 = fg_coeff_B(s1, T);
    double A2 = fg_coeff_A(s2, T), B2 = fg_coeff_B(s2, T);
    double det = A1 * B2 - A2 * B1;
    ModeSystem sys;
    sys.xi = xi;
    sys.order = 1;
    sys.s1 = s1;
    sys.s2 = s2;
    sys.det = det;
    double smax, smin;
    svd2(A1, B1, A2, B2, smax, smin);
    sys.cond = (smin > 0) ? smax / smin : 1e300;
    if (std::abs(det) < 1e-12)
      throw std::runtime_error("recover_FG_torus: ill-conditioned mode pair");
    cplx fhat = (d1 * B2 - d2 * B1) / det;
    cplx ghat = (A1 * d2 - A2 * d1) / det;
    cplx r1 = A1 * fhat + B1 * ghat - d1;
    cplx r2 = A2 * fhat + B2 * ghat - d2;
    sys.residual = std::hypot(std::abs(r1), std::abs(r2)) /
                   (1.0 + std::hypot(std::abs(d1), std::abs(d2)));
    out.systems.push_back(sys);
    Ft.c[wrap_slot(xi)] = fhat;
    Gt.c[wrap_slot(xi)] = ghat;
  }
  Field F1 = inverse_fourier(Ft);
  Field G1 = inverse_fourier(Gt);
  out.F.push_back(F1);
  out.G.push_back(G1);
  if (K_max == 1) return out;

  // ----- order two -----
  // space-time first-order value fields from the recovered coefficients:
  // -d_t u1 - Lap u1 = F1 m1, u1(T) = G1 m1(T), with m1 the pure heat mode
  std::map<std::array<int, 3>, SpaceTimeField> u1st_cache, m1_cache;
  auto m1_of = [&](const std::array<int, 3>& z) -> const SpaceTimeField& {
    auto it = m1_cache.find(z);
    if (it != m1_cache.end()) return it->second;
    return m1_cache.emplace(z, probe_torus_heat(g, tg, z, 0.0).w)
        .first->second;
  };
  auto u1st_of = [&](const std::array<int, 3>& z) -> const SpaceTimeField& {
    auto it = u1st_cache.find(z);
    if (it != u1st_cache.end()) return it->second;
    const SpaceTimeField& m1 = m1_of(z);
    SpaceTimeField src(g, tg);
    for (int n = 0; n <= tg.steps; ++n)
      src.set_slice(n, hadamard(F1, m1.slice(n)));
    HeatProblem hp;
    hp.grid = g;
    hp.time = tg;
    hp.direction = Direction::Backward;
    hp.data = hadamard(G1, m1.slice(tg.steps));
    hp.source = &src;
    return u1st_cache.emplace(z, solve_heat(hp).w).first->second;
  };

  FourierTable Ft2 = Ft, Gt2 = Gt;
  std::fill(Ft2.c.begin(), Ft2.c.end(), cplx(0.0));
  std::fill(Gt2.c.begin(), Gt2.c.end(), cplx(0.0));

  auto order2_datum = [&](const std::array<int, 3>& z1,
                          const std::array<int, 3>& z2,
                          const std::array<int, 3>& z3) {
    Field U0 = ctx.u_mixed(z1, z2);
    const SpaceTimeField& m1 = m1_of(z1);
    const SpaceTimeField& m2 = m1_of(z2);
    const SpaceTimeField& u1 = u1st_of(z1);
    const SpaceTimeField& u2 = u1st_of(z2);
    // density cross term: d_t M - Lap M = div(m1 grad u2) + div(m2 grad u1)
    SpaceTimeField src(g, tg), gg(g, tg);
    for (int n = 0; n <= tg.steps; ++n) {
      std::vector<Field> g1 = gradient(u1.slice(n));
      std::vector<Field> g2 = gradient(u2.slice(n));
      Field m1n = m1.slice(n), m2n = m2.slice(n);
      std::vector<Field> flux;
      Field dot(g, 0.0);
      for (size_t a = 0; a < g1.size(); ++a) {
        Field fa = hadamard(m1n, g2[a]);
        fa += hadamard(m2n, g1[a]);
        flux.push_back(fa);
        dot += hadamard(g1[a], g2[a]);
      }
      src.set_slice(n, divergence(flux));
      gg.set_slice(n, dot);
    }
    HeatProblem hp;
    hp.grid = g;
    hp.time = tg;
    hp.direction = Direction::Forward;
    hp.data = Field(g, 0.0);
    hp.source = &src;
    SpaceTimeField M = solve_heat(hp).w;

    const SpaceTimeField& w = m1_of(z3);  // adjoint heat exponential
    cplx d = pair(U0, w.slice(0));
    d -= pair(hadamard(G1, M.slice(tg.steps)), w.slice(tg.steps));
    SpaceTimeField FM(g, tg);
    for (int n = 0; n <= tg.steps; ++n)
      FM.set_slice(n, hadamard(F1, M.slice(n)));
    d -= pair_spacetime(FM, w);
    d += pair_spacetime(gg, w);
    return d;
  };

  for (const auto& xi : targets) {
    std::array<int, 3> zero{0, 0, 0};
    std::array<int, 3> e = probe_split(xi);
    std::array<int, 3> xie{xi[0] - e[0], xi[1] - e[1], xi[2] - e[2]};
    double s1 = mode_s(g, xi);
    double s2 = mode_s(g, xie) + mode_s(g, e);
    cplx d1 = order2_datum(xi, zero, zero);
    cplx d2 = order2_datum(xie, e, zero);
    double A1 = fg_coeff_A(s1, T), B1 = fg_coeff_B(s1, T);
    double A2 = fg_coeff_A(s2, T), B2 = fg_coeff_B(s2, T);
    double det = A1 * B2 - A2 * B1;
    ModeSystem sys;
    sys.xi = xi;
    sys.order = 2;
    sys.s1 = s1;
    sys.s2 = s2;
    sys.det = det;
    double smax, smin;
    svd2(A1, B1, A2, B2, smax, smin);
    sys.cond = (smin > 0) ? smax / smin : 1e300;
    if (std::abs(det) < 1e-12)
      throw std::runtime_error("recover_FG_torus: ill-conditioned mode pair");
    cplx fhat = (d1 * B2 - d2 * B1) / det;
    cplx ghat = (A1 * d2 - A2 * d1) / det;
    cplx r1 = A1 * fhat + B1 * ghat - d1;
    cplx r2 = A2 * fhat + B2 * ghat - d2;
    sys.residual = std::hypot(std::abs(r1), std::abs(r2)) /
                   (1.0 + std::hypot(std::abs(d1), std::abs(d2)));
    out.systems.push_back(sys);
    Ft2.c[wrap_slot(xi)] = fhat;
    Gt2.c[wrap_slot(xi)] = ghat;
  }
  out.F.push_back(inverse_fourier(Ft2));
  out.G.push_back(inverse_fourier(Gt2));
  return out;
}

// ------------------------------------------------ bounded-domain recovery

CoverageField recover_kappa_bounded(const BoundedOracle& oracle,
                                    const SpatialGrid& g, const TimeGrid& tg,
                                    const std::vector<EigenPair>& probes,
                                    int xi_cutoff, double eps,
                                    double grad_floor_rel) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("recover_kappa_bounded: box grid required");
  if (probes.empty())
    throw std::invalid_argument("recover_kappa_bounded: no probes");
  std::vector<std::array<int, 3>> modes = cos_modes(g, xi_cutoff);
  std::vector<Field> basis;
  std::vector<SpaceTimeField> tests;
  for (const auto& k : modes) {
    basis.push_back(cos_basis(g, k));
    tests.push_back(cos_test(g, tg, k));
  }

  Field acc_num(g, 0.0), acc_den(g, 0.0);
  std::vector<std::uint8_t> covered(g.size(), 0);
  Field zero_m0(g, 0.0);
  double tau = tg.tau();

  for (const auto& ep : probes) {
    Field gs = grad_sq(ep.phi);
    double gmax = gs.max_abs();
    if (gmax < 1e-14)
      throw std::invalid_argument(
          "recover_kappa_bounded: probe has vanishing gradient");
    // terminal probe psi = +-eps e^{beta T} phi: the symmetric second
    // difference isolates the quadratic response
    //   -d_t U - Lap U = -kappa |grad phi|^2 e^{2 beta t}, U(T) = 0,
    // and a Richardson pass in eps removes the quartic remainder
    Field f = scaled(ep.phi, std::exp(ep.beta * tg.T));
    auto quad = [&](double e) {
      CauchyData p = oracle(scaled(f, e), zero_m0);
      CauchyData m = oracle(scaled(f, -e), zero_m0);
      return cd_axpy(1.0 / (e * e), p, 1.0 / (e * e), m);
    };
    CauchyData U = cd_axpy(4.0 / 3.0, quad(eps / 2.0), -1.0 / 3.0, quad(eps));

    // first-order amplitude under the scheme: a_n = e^{beta T} rho^{N-n};
    // the Newton-linearized quadratic term samples the cross product
    // a_n a_{n+1} on each step interval
    double rho = cn_decay(ep.beta, tau);
    double aT = std::exp(ep.beta * tg.T);
    std::vector<double> th(tg.steps);
    double an = aT * std::pow(rho, tg.steps);
    for (int n = 0; n < tg.steps; ++n) {
      double an1 = an / rho;
      th[n] = an * an1;
      an = an1;
    }

    std::vector<double> b;
    std::vector<Field> weights;
    for (size_t r = 0; r < tests.size(); ++r) {
      b.push_back(-pair(U.u0, tests[r].slice(0)).real());
      weights.push_back(test_weight(tests[r], th));
    }
    Field h = solve_basis(g, basis, weights, b);  // = kappa |grad phi|^2

    double floor = grad_floor_rel * gmax;
    for (long x = 0; x < g.size(); ++x) {
      if (std::abs(gs[x]) < floor) continue;
      acc_num[x] += gs[x].real() * (h[x].real() / gs[x].real());
      acc_den[x] += gs[x].real();
      covered[x] = 1;
    }
  }

  CoverageField out;
  out.value = Field(g, 0.0);
  out.covered = covered;
  long ncov = 0;
  for (long x = 0; x < g.size(); ++x) {
    if (covered[x]) {
      out.value[x] = acc_num[x].real() / acc_den[x].real();
      ++ncov;
    }
  }
  out.coverage = double(ncov) / double(g.size());
  return out;
}

std::vector<Field> recover_F_bounded(const BoundedOracle& oracle,
                                     const SpatialGrid& g, const TimeGrid& tg,
                                     const Field& kappa, int K_max,
                                     int xi_cutoff, double eps) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("recover_F_bounded: box grid required");
  if (K_max < 1 || K_max > 2)
    throw std::invalid_argument("recover_F_bounded: K_max must be 1 or 2");
  std::vector<std::array<int, 3>> modes = cos_modes(g, xi_cutoff);
  std::vector<Field> basis;
  std::vector<SpaceTimeField> tests;
  for (const auto& k : modes) {
    basis.push_back(cos_basis(g, k));
    tests.push_back(cos_test(g, tg, k));
  }
  std::vector<double> th_one(tg.steps, 1.0);
  std::vector<Field> weights;
  for (const auto& t : tests) weights.push_back(test_weight(t, th_one));
  double tau = tg.tau();
  Field zero_psi(g, 0.0);
  Field one(g, 1.0);

  auto orc = [&](double scale) { return oracle(zero_psi, scaled(one, scale)); };
  CauchyData at_half = orc(eps / 2.0);
  CauchyData at_one = orc(eps);

  // first order: constant density probe m1 = 1,
  // -d_t u1 - Lap u1 = F1, u1(T) = 0
  CauchyData u1cd = cd_axpy(4.0 / eps, at_half, -1.0 / eps, at_one);
  std::vector<double> b1;
  for (const auto& t : tests) b1.push_back(pair(u1cd.u0, t.slice(0)).real());
  Field F1 = solve_basis(g, basis, weights, b1);
  std::vector<Field> out{F1};
  if (K_max == 1) return out;

  // second order: subtract the computable density correction M and the
  // Hamiltonian quadratic term before reading off F2
  SpaceTimeField srcF1(g, tg);
  for (int n = 0; n <= tg.steps; ++n) srcF1.set_slice(n, F1);
  HeatProblem hb;
  hb.grid = g;
  hb.time = tg;
  hb.direction = Direction::Backward;
  hb.data = Field(g, 0.0);
  hb.source = &srcF1;
  SpaceTimeField u1 = solve_heat(hb).w;

  SpaceTimeField srcM(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    std::vector<Field> gr = gradient(u1.slice(n));
    std::vector<Field> flux;
    for (auto& c : gr) flux.push_back(scaled(hadamard(kappa, c), 2.0));
    srcM.set_slice(n, divergence(flux));
  }
  HeatProblem hf;
  hf.grid = g;
  hf.time = tg;
  hf.direction = Direction::Forward;
  hf.data = Field(g, 0.0);
  hf.source = &srcM;
  SpaceTimeField M = solve_heat(hf).w;

  // per-interval correction sources as the scheme sees them: the density
  // feedback F1 Mbar and the quadratic-gradient cross term
  // kappa grad u1_n . grad u1_{n+1}
  std::vector<Field> corr;
  std::vector<Field> gr_prev = gradient(u1.slice(0));
  for (int n = 0; n < tg.steps; ++n) {
    std::vector<Field> gr_next = gradient(u1.slice(n + 1));
    Field mbar = M.slice(n);
    mbar += M.slice(n + 1);
    mbar *= cplx(0.5);
    Field c = hadamard(F1, mbar);
    for (int a = 0; a < g.dim; ++a)
      c -= hadamard(kappa, hadamard(gr_prev[a], gr_next[a]));
    corr.push_back(c);
    gr_prev = std::move(gr_next);
  }

  // u2 from positive-density differences: (u(2e) - 2u(e))/e^2 = u2 + O(e)
  CauchyData at_two = orc(2.0 * eps);
  CauchyData val_e =
      cd_axpy(1.0 / (eps * eps), at_two, -2.0 / (eps * eps), at_one);
  double eh = eps / 2.0;
  CauchyData val_h =
      cd_axpy(1.0 / (eh * eh), at_one, -2.0 / (eh * eh), at_half);
  CauchyData u2cd = cd_axpy(2.0, val_h, -1.0, val_e);

  std::vector<double> b2;
  for (const auto& t : tests) {
    cplx row = pair(u2cd.u0, t.slice(0));
    for (int n = 0; n < tg.steps; ++n) {
      Field wbar = t.slice(n);
      wbar += t.slice(n + 1);
      wbar *= cplx(0.5);
      row -= tau * pair(corr[n], wbar);
    }
    b2.push_back(row.real());
  }
  out.push_back(solve_basis(g, basis, weights, b2));
  return out;
}

KernelResult recover_kernel_nonlocal(const BoundedOracle& oracle,
                                     const SpatialGrid& g, const TimeGrid& tg,
                                     int eigen_count, int xi_cutoff,
                                     double eps) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument("recover_kernel_nonlocal: box grid required");
  if (eigen_count < 1)
    throw std::invalid_argument("recover_kernel_nonlocal: need eigen_count >= 1");
  std::vector<EigenPair> eig = neumann_eigenpairs(g, eigen_count + 1);
  std::vector<std::array<int, 3>> modes = cos_modes(g, xi_cutoff);
  std::vector<Field> basis;
  std::vector<SpaceTimeField> tests;
  for (const auto& k : modes) {
    basis.push_back(cos_basis(g, k));
    tests.push_back(cos_test(g, tg, k));
  }
  double tau = tg.tau();
  Field zero_psi(g, 0.0);

  KernelResult out;
  out.kernel.grid = g;
  out.kernel.K.assign(size_t(g.size()) * g.size(), 0.0);

  for (int i = 1; i <= eigen_count; ++i) {
    const EigenPair& ep = eig[i];
    // probe m0 = eps (phi + off): the positive offset keeps the density
    // admissible and is invisible through the mean-zero kernel
    double off = std::max(2.0, 1.5 * ep.phi.max_abs());
    Field base = ep.phi;
    for (long x = 0; x < g.size(); ++x) base[x] += off;
    CauchyData a = oracle(zero_psi, scaled(base, eps / 2.0));
    CauchyData b = oracle(zero_psi, scaled(base, eps));
    CauchyData u1cd = cd_axpy(4.0 / eps, a, -1.0 / eps, b);

    // -d_t u1 - Lap u1 = theta(t) (K phi)(x), u1(T) = 0, where theta is
    // the discrete heat decay of the probe mode
    double sig = cn_decay(ep.beta, tau);
    std::vector<double> th(tg.steps);
    double bn = 1.0;
    for (int n = 0; n < tg.steps; ++n) {
      th[n] = bn * (1.0 + sig) / 2.0;
      bn *= sig;
    }
    std::vector<double> rows;
    std::vector<Field> weights;
    for (const auto& t : tests) {
      rows.push_back(pair(u1cd.u0, t.slice(0)).real());
      weights.push_back(test_weight(t, th));
    }
    Field ci = solve_basis(g, basis, weights, rows);
    out.coeff.push_back(ci);
    for (long x = 0; x < g.size(); ++x)
      for (long y = 0; y < g.size(); ++y)
        out.kernel.K[x * g.size() + y] += ci[x].real() * ep.phi[y].real();
  }
  out.mean_zero_defect = out.kernel.mean_zero_defect();
  return out;
}

// ------------------------------------- constant-coupling probes and decay

ProbePair build_probe_pair_conpb(double c, const EigenPair& mode,
                                 const TimeGrid& tg) {
  if (mode.beta <= 0.0)
    throw std::invalid_argument("build_probe_pair_conpb: need beta > 0");
  if (c == 0.0)
    throw std::invalid_argument(
        "build_probe_pair_conpb: c = 0 degenerates the mode pair (k = 0)");
  double beta = mode.beta;
  double disc = beta * beta + c * beta;
  if (disc <= 0.0)
    throw std::invalid_argument(
        "build_probe_pair_conpb: beta^2 + c beta must be positive");
  ProbePair out;
  out.lambda = std::sqrt(disc);
  out.k = beta - out.lambda;
  double kk = out.k * (c + out.k);
  if (std::abs(kk) < 1e-14)
    throw std::invalid_argument("build_probe_pair_conpb: degenerate k (c + k)");
  out.D = c / kk;

  const SpatialGrid& g = mode.phi.grid;
  double lam = out.lambda, D = out.D;
  auto m_amp = [&](double t) {
    return -lam * std::exp(-lam * t) + D * std::exp(lam * t);
  };
  // value amplitude from the density equation: u_a = -(m_a' + beta m_a)/beta
  auto u_amp = [&](double t) {
    double ma_p = lam * lam * std::exp(-lam * t) + D * lam * std::exp(lam * t);
    return -(ma_p + beta * m_amp(t)) / beta;
  };
  out.m = SpaceTimeField(g, tg);
  SpaceTimeField u(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double t = tg.t(n);
    out.m.set_slice(n, scaled(mode.phi, m_amp(t)));
    u.set_slice(n, scaled(mode.phi, u_amp(t)));
  }
  out.rho = out.m.time_reversed();

  // midpoint-collocation residuals of the linearized pair
  //   d_t m - Lap m - Lap u = 0,  -d_t u - Lap u = c m
  double tau = tg.tau();
  double rm = 0.0, ru = 0.0, rr = 0.0;
  SpaceTimeField u_rev = u.time_reversed();
  for (int n = 0; n < tg.steps; ++n) {
    Field mbar = out.m.slice(n);
    mbar += out.m.slice(n + 1);
    mbar *= 0.5;
    Field ubar = u.slice(n);
    ubar += u.slice(n + 1);
    ubar *= 0.5;
    Field dm = out.m.slice(n + 1);
    dm -= out.m.slice(n);
    dm *= 1.0 / tau;
    Field du = u.slice(n + 1);
    du -= u.slice(n);
    du *= 1.0 / tau;
    Field Rm = dm;
    Rm -= laplacian(mbar);
    Rm -= laplacian(ubar);
    Field Ru = scaled(du, -1.0);
    Ru -= laplacian(ubar);
    Ru -= scaled(mbar, c);
    rm = std::max(rm, Rm.max_abs());
    ru = std::max(ru, Ru.max_abs());
    // reflected pair (rho, u_rev): -d_t rho - Lap rho - Lap u_rev = 0
    Field rbar = out.rho.slice(n);
    rbar += out.rho.slice(n + 1);
    rbar *= 0.5;
    Field urb = u_rev.slice(n);
    urb += u_rev.slice(n + 1);
    urb *= 0.5;
    Field dr = out.rho.slice(n + 1);
    dr -= out.rho.slice(n);
    dr *= -1.0 / tau;
    Field Rr = dr;
    Rr -= laplacian(rbar);
    Rr -= laplacian(urb);
    rr = std::max(rr, Rr.max_abs());
  }
  out.residual_m = std::max(rm, ru);
  out.residual_rho = rr;
  return out;
}

cplx key_pairing(const Field& F1, const Field& F2, const SpaceTimeField& m2,
                 const SpaceTimeField& rho) {
  SpaceTimeField integrand(m2.grid, m2.time);
  for (int n = 0; n <= m2.time.steps; ++n) {
    Field s = F1;
    s -= F2;
    integrand.set_slice(n, hadamard(s, m2.slice(n)));
  }
  return pair_spacetime(integrand, rho);
}

DecayEstimate estimate_c_from_decay(const SpaceTimeField& m_traj,
                                    const EigenPair& mode) {
  const TimeGrid& tg = m_traj.time;
  int N = tg.steps + 1;
  std::vector<double> y(N);
  for (int n = 0; n < N; ++n)
    y[n] = pair(m_traj.slice(n), mode.phi).real();

  double ynorm = 0.0;
  for (double v : y) ynorm += v * v;
  ynorm = std::sqrt(ynorm);

  // linear fit a e^{-lam t} + b e^{lam t} for a trial lambda
  auto misfit = [&](double lam) {
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    for (int n = 0; n < N; ++n) {
      double t = tg.t(n);
      double e1 = std::exp(-lam * t), e2 = std::exp(lam * t);
      s11 += e1 * e1;
      s12 += e1 * e2;
      s22 += e2 * e2;
      r1 += e1 * y[n];
      r2 += e2 * y[n];
    }
    double det = s11 * s22 - s12 * s12;
    double a = 0, b = 0;
    if (std::abs(det) > 1e-300) {
      a = (r1 * s22 - r2 * s12) / det;
      b = (s11 * r2 - s12 * r1) / det;
    }
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      double t = tg.t(n);
      double d = a * std::exp(-lam * t) + b * std::exp(lam * t) - y[n];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  double beta = mode.beta;
  double best_lam = beta, best = misfit(beta);
  for (int i = 0; i <= 400; ++i) {
    double lam = beta * (0.2 + 3.8 * i / 400.0);
    double v = misfit(lam);
    if (v < best) {
      best = v;
      best_lam = lam;
    }
  }
  // golden-section refinement around the scan minimum
  double step = beta * 3.8 / 400.0;
  double lo = std::max(1e-8, best_lam - step), hi = best_lam + step;
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = misfit(x1), f2 = misfit(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = misfit(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = misfit(x2);
    }
  }
  best_lam = (lo + hi) / 2.0;
  best = misfit(best_lam);

  DecayEstimate out;
  out.lambda = best_lam;
  out.c = (best_lam * best_lam - beta * beta) / beta;
  out.fit_residual = (ynorm > 0) ? best / ynorm : 0.0;
  return out;
}

// -------------------------------------------------- anomaly discrimination

AnomalyReport anomaly_discriminate(const SpatialGrid& g, const TimeGrid& tg,
                                   const std::vector<std::uint8_t>& D1,
                                   const std::vector<std::uint8_t>& D2,
                                   InclusionBC kind, const Field& g1) {
  validate_inclusion_mask(g, D1);
  validate_inclusion_mask(g, D2);

  auto run = [&](const std::vector<std::uint8_t>& D, BoundaryTrace& rec,
                 bool& positive) {
    std::vector<std::uint8_t> mask = D;
    if (kind == InclusionBC::Dirichlet)
      for (long x = 0; x < g.size(); ++x)
        if (g.is_boundary(x)) mask[x] = 1;
    HeatProblem hp;
    hp.grid = g;
    hp.time = tg;
    hp.direction = Direction::Forward;
    hp.data = g1;
    hp.dirichlet_mask = &mask;
    HeatOpts ho;
    ho.rannacher_steps = 2;
    SpaceTimeField w = solve_heat(hp, ho).w;
    rec = (kind == InclusionBC::Dirichlet) ? boundary_normal_derivative(w)
                                           : boundary_values(w);
    positive = true;
    for (int n = 1; n <= tg.steps && positive; ++n)
      for (long x = 0; x < g.size(); ++x)
        if (!mask[x] && w.at(n, x).real() <= 0.0) {
          positive = false;
          break;
        }
  };

  AnomalyReport out;
  run(D1, out.record1, out.positive1);
  run(D2, out.record2, out.positive2);
  out.distance = out.record1.l2_distance(out.record2);
  return out;
}

// ------------------------------------------- stationary recovery via CGO

Field conjugation_potential(const Field& u0) {
  std::vector<Field> gr = gradient(u0);
  Field V(u0.grid, 0.0);
  for (const auto& c : gr) V += hadamard(c, c);
  V *= 0.25;
  V -= scaled(laplacian(u0), 0.5);
  return V;
}

StationaryCgoResult recover_F1_stationary_cgo(
    const PairingOracle& oracle, const StationarySolution& background,
    const std::vector<std::array<int, 3>>& modes,
    const std::vector<double>& R_ladder) {
  const SpatialGrid& g = background.u.grid;
  if (g.kind != GridKind::PeriodicTorus || g.dim != 3)
    throw std::invalid_argument(
        "recover_F1_stationary_cgo: three-dimensional torus required");
  if (R_ladder.size() < 2)
    throw std::invalid_argument(
        "recover_F1_stationary_cgo: need at least two ladder points");
  Field H = conjugation_potential(background.u);

  StationaryCgoResult out;
  out.modes = modes;
  FourierTable table;
  table.grid = g;
  table.c.assign(g.size(), 0.0);
  auto wrap_slot = [&](const std::array<int, 3>& k) {
    auto w = [&](int kk, int n) { return ((kk % n) + n) % n; };
    return g.index(w(k[0], g.n[0]), w(k[1], g.n[1]), w(k[2], g.n[2]));
  };

  for (const auto& k : modes) {
    std::vector<double> corr(R_ladder.size(), 0.0);
    cplx limit;
    if (k[0] == 0 && k[1] == 0 && k[2] == 0) {
      limit = oracle(Field(g, 1.0));  // constant test function, exact
    } else {
      std::vector<cplx> data;
      for (double R : R_ladder) {
        XiPair p = build_xi_pair(k, R);
        CVec3 xi1 = p.xi1, xi2 = p.xi2;
        for (int a = 0; a < 3; ++a) {
          xi1[a] *= 2.0 * kPi;  // so exp((xi1+xi2).x) = e^{2 pi i k.x}
          xi2[a] *= 2.0 * kPi;
        }
        Field w1 = restrict_extension(solve_omega(H, xi1).omega, g);
        Field w2 = restrict_extension(solve_omega(H, xi2).omega, g);
        Field test = mode_exp(g, k, +1.0);
        for (long x = 0; x < g.size(); ++x)
          test[x] *= (1.0 + w1[x]) * (1.0 + w2[x]);
        data.push_back(oracle(test));
      }
      // Richardson in 1/R on the last two ladder points (assumes the
      // final point doubles the previous one)
      size_t L = data.size();
      limit = 2.0 * data[L - 1] - data[L - 2];
      for (size_t j = 0; j < L; ++j) corr[j] = std::abs(data[j] - limit);
    }
    out.fhat.push_back(limit);
    out.correction.push_back(corr);
    // oracle tests against e^{+2 pi i k.x}: that reads the coefficient
    // stored at mode -k of the forward transform
    std::array<int, 3> mk{-k[0], -k[1], -k[2]};
    table.c[wrap_slot(mk)] = limit;
  }
  out.f = inverse_fourier(table);
  out.F1 = out.f;
  for (long x = 0; x < g.size(); ++x) out.F1[x] /= background.m[x];
  return out;
}

}  // namespace mfglab
