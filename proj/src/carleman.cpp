#include "mfglab/carleman.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "mfglab/ops.hpp"

namespace mfglab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double pi = std::numbers::pi;

// deterministic standard normal (Box-Muller on raw 53-bit uniforms, so the
// stream does not depend on the standard library's distribution choices)
double gauss(std::mt19937_64& rng) {
  double u1 = std::ldexp(static_cast<double>(rng() >> 11) + 0.5, -53);
  double u2 = std::ldexp(static_cast<double>(rng() >> 11), -53);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

double linfit_slope(const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// log-sum-exp accumulator for sums of positive terms given by their logs
struct LogSum {
  double m = -kInf;
  double s = 0.0;
  void add(double lt) {
    if (lt == -kInf) return;
    if (lt > m) {
      s = s * std::exp(m - lt) + 1.0;
      m = lt;
    } else {
      s += std::exp(lt - m);
    }
  }
  // log of (value * e^{lt}) for value >= 0
  void add(double lt, double value) {
    if (value > 0.0) add(lt + std::log(value));
  }
  double value() const { return s == 0.0 ? -kInf : m + std::log(s); }
};

// second-order time differencing at the grid nodes
SpaceTimeField dt_fd(const SpaceTimeField& f) {
  SpaceTimeField out(f.grid, f.time);
  const long X = f.grid.size();
  const int N = f.time.steps;
  const double tau = f.time.tau();
  for (long i = 0; i < X; ++i) {
    out.at(0, i) =
        (-1.5 * f.at(0, i) + 2.0 * f.at(1, i) - 0.5 * f.at(2, i)) / tau;
    for (int n = 1; n < N; ++n)
      out.at(n, i) = (f.at(n + 1, i) - f.at(n - 1, i)) / (2.0 * tau);
    out.at(N, i) =
        (1.5 * f.at(N, i) - 2.0 * f.at(N - 1, i) + 0.5 * f.at(N - 2, i)) / tau;
  }
  return out;
}

long axis_stride(const SpatialGrid& g, int a) {
  if (a == 0) return 1;
  if (a == 1) return g.n[0];
  return static_cast<long>(g.n[0]) * g.n[1];
}

// centered second difference along one axis with even (zero-flux) reflection
Field second_axis(const Field& f, int a) {
  const SpatialGrid& g = f.grid;
  Field out(g);
  const double ih2 = 1.0 / (g.h(a) * g.h(a));
  const long stride = axis_stride(g, a);
  for (long idx = 0; idx < g.size(); ++idx) {
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    int i = ijk[a];
    cplx lo = (i == 0) ? f[idx + stride] : f[idx - stride];
    cplx hi = (i == g.n[a] - 1) ? f[idx - stride] : f[idx + stride];
    out[idx] = (lo + hi - 2.0 * f[idx]) * ih2;
  }
  return out;
}

// pointwise sum over i,j of |d_i d_j f|^2
std::vector<double> hess_sq(const Field& f) {
  const SpatialGrid& g = f.grid;
  std::vector<double> out(g.size(), 0.0);
  for (int a = 0; a < g.dim; ++a) {
    Field d2 = second_axis(f, a);
    for (long idx = 0; idx < g.size(); ++idx) out[idx] += std::norm(d2[idx]);
  }
  if (g.dim > 1) {
    auto grads = gradient(f);
    for (int a = 0; a < g.dim; ++a)
      for (int b = a + 1; b < g.dim; ++b) {
        Field mixed = gradient(grads[a])[b];
        for (long idx = 0; idx < g.size(); ++idx)
          out[idx] += 2.0 * std::norm(mixed[idx]);
      }
  }
  return out;
}

std::vector<double> grad_sq(const Field& f) {
  auto grads = gradient(f);
  std::vector<double> out(f.grid.size(), 0.0);
  for (int a = 0; a < f.grid.dim; ++a)
    for (long idx = 0; idx < f.grid.size(); ++idx)
      out[idx] += std::norm(grads[a][idx]);
  return out;
}

// Visit every node of the face (axis, side) with its surface trapezoid
// weight over the remaining axes.
template <typename Fn>
void for_each_face_node(const SpatialGrid& g, int axis, int side, Fn&& fn) {
  for (long idx = 0; idx < g.size(); ++idx) {
    int ijk[3];
    g.unindex(idx, ijk[0], ijk[1], ijk[2]);
    if (ijk[axis] != (side == 0 ? 0 : g.n[axis] - 1)) continue;
    double sw = 1.0;
    for (int b = 0; b < g.dim; ++b) {
      if (b == axis) continue;
      bool edge = ijk[b] == 0 || ijk[b] == g.n[b] - 1;
      sw *= g.h(b) * (edge ? 0.5 : 1.0);
    }
    fn(idx, sw);
  }
}

// Visit observed faces (all except the eta = 0 face of the weight).
template <typename Fn>
void for_each_observed_node(const SpatialGrid& g, const SpaceTimeWeight& w,
                            Fn&& fn) {
  for (int a = 0; a < g.dim; ++a)
    for (int side = 0; side < 2; ++side) {
      if (a == w.unobserved_axis && side == 1) continue;
      for_each_face_node(g, a, side, fn);
    }
}

// unweighted lateral H1 trace energy over the observed faces:
// Int_0^T Int_Gamma (|f|^2 + |grad f|^2 + |d_t f|^2)
double observed_h1_trace_sq(const SpaceTimeField& f, const SpaceTimeWeight& w) {
  const SpatialGrid& g = f.grid;
  const int N = f.time.steps;
  const double tau = f.time.tau();
  SpaceTimeField ft = dt_fd(f);
  double total = 0.0;
  for (int n = 0; n <= N; ++n) {
    double wt = tau * ((n == 0 || n == N) ? 0.5 : 1.0);
    Field fn = f.slice(n);
    auto gsq = grad_sq(fn);
    for_each_observed_node(g, w, [&](long idx, double sw) {
      total += wt * sw *
               (std::norm(fn[idx]) + gsq[idx] + std::norm(ft.at(n, idx)));
    });
  }
  return total;
}

// random Neumann-compatible band-limited space-time trial
SpaceTimeField make_trial(const SpatialGrid& g, const TimeGrid& tg,
                          std::mt19937_64& rng, int kmax = 3, int jmax = 2) {
  struct Mode {
    int k[3];
    int j;
    bool sine;
    double amp;
  };
  std::vector<Mode> modes;
  int lim[3] = {0, 0, 0};
  for (int a = 0; a < g.dim; ++a) lim[a] = std::min(kmax, g.n[a] - 1);
  for (int k0 = 0; k0 <= lim[0]; ++k0)
    for (int k1 = 0; k1 <= lim[1]; ++k1)
      for (int k2 = 0; k2 <= lim[2]; ++k2)
        for (int j = 0; j <= jmax; ++j)
          for (int ph = 0; ph < 2; ++ph) {
            if (ph == 1 && j == 0) continue;  // sin(0) is identically zero
            double decay =
                1.0 + k0 * k0 + k1 * k1 + k2 * k2 + static_cast<double>(j * j);
            modes.push_back({{k0, k1, k2}, j, ph == 1, gauss(rng) / decay});
          }
  SpaceTimeField out(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double t = tg.t(n);
    for (long idx = 0; idx < g.size(); ++idx) {
      int ijk[3];
      g.unindex(idx, ijk[0], ijk[1], ijk[2]);
      double val = 0.0;
      for (const Mode& md : modes) {
        double sp = md.amp;
        for (int a = 0; a < g.dim; ++a)
          sp *= std::cos(pi * md.k[a] * g.coord(a, ijk[a]) / g.side[a]);
        double th = pi * md.j * t / tg.T;
        val += sp * (md.sine ? std::sin(th) : std::cos(th));
      }
      out.at(n, idx) = val;
    }
  }
  return out;
}

// random time-independent Neumann-compatible field
Field make_spatial_trial(const SpatialGrid& g, std::mt19937_64& rng,
                         int kmax = 4) {
  TimeGrid one{1.0, 1};
  return make_trial(g, one, rng, kmax, 0).slice(0);
}

double field_h2_sq(const Field& f) {
  const SpatialGrid& g = f.grid;
  auto gsq = grad_sq(f);
  auto hsq = hess_sq(f);
  double total = 0.0;
  for (long idx = 0; idx < g.size(); ++idx)
    total += g.quad_weight(idx) * (std::norm(f[idx]) + gsq[idx] + hsq[idx]);
  return total;
}

void require_box(const SpatialGrid& g, const char* op) {
  if (g.kind != GridKind::NeumannBox)
    throw std::invalid_argument(std::string(op) + ": box grid required");
}

}  // namespace

double TimeWeight::operator()(double t) const {
  return std::exp(lambda * std::pow(t + b, k));
}

double SpaceTimeWeight::mu(double t) const {
  double half = T / 2.0;
  return t * t * (T - t) * (T - t) / (half * half);
}

double SpaceTimeWeight::log_phi(long idx, double t) const {
  double m = mu(t);
  if (m <= 0.0) return kInf;  // phi blows up at the time endpoints
  return lambda * eta[idx].real() - std::log(m);
}

double SpaceTimeWeight::phi(long idx, double t) const {
  return std::exp(log_phi(idx, t));
}

double SpaceTimeWeight::alpha(long idx, double t) const {
  double m = mu(t);
  if (m <= 0.0) return -kInf;
  return (std::exp(lambda * eta[idx].real()) -
          std::exp(2.0 * lambda * eta_max)) /
         m;
}

SpaceTimeWeight make_box_weight(const SpatialGrid& g, double T,
                                double lambda) {
  require_box(g, "make_box_weight");
  SpaceTimeWeight w;
  w.lambda = lambda;
  w.T = T;
  w.unobserved_axis = 0;
  double L = g.side[0];
  w.eta = sample(g, [&](double x0, double = 0.0, double = 0.0) {
    return 1.0 - x0 / L;
  });
  w.eta_max = 1.0;
  return w;
}

double sup_weighted(const SpaceTimeWeight& w, const TimeGrid& tg, double s,
                    double rho) {
  double best = 0.0;
  for (int n = 1; n < tg.steps; ++n) {
    double t = tg.t(n);
    for (long idx = 0; idx < w.eta.size(); ++idx) {
      double e = 2.0 * s * w.alpha(idx, t) + rho * w.log_phi(idx, t);
      best = std::max(best, std::exp(e));
    }
  }
  return best;
}

double UcpWeight::operator()(long idx, double t) const {
  return std::exp(lambda * (d[idx].real() - beta * (t - t0) * (t - t0)));
}

double parabolic_carleman_log_ratio(const SpaceTimeField& u,
                                    const SpaceTimeWeight& w, double s) {
  require_box(u.grid, "parabolic_carleman_log_ratio");
  const SpatialGrid& g = u.grid;
  const TimeGrid& tg = u.time;
  const int N = tg.steps;
  const double tau = tg.tau();
  const double ls = std::log(s);
  SpaceTimeField ut = dt_fd(u);
  LogSum lhs, rhs;
  for (int n = 1; n < N; ++n) {
    double t = tg.t(n);
    Field un = u.slice(n);
    Field lap = laplacian(un);
    auto gsq = grad_sq(un);
    auto hsq = hess_sq(un);
    for (long idx = 0; idx < g.size(); ++idx) {
      double e2sa = 2.0 * s * w.alpha(idx, t);
      if (e2sa == -kInf) continue;
      double lphi = w.log_phi(idx, t);
      double qw = g.quad_weight(idx) * tau;
      double utn = std::norm(ut.at(n, idx));
      // (1/(s phi))(|u_t|^2 + sum |d_i d_j u|^2) + s phi |grad u|^2
      //   + s^3 phi^3 |u|^2, all against e^{2 s alpha}
      lhs.add(e2sa - lphi - ls, (utn + hsq[idx]) * qw);
      lhs.add(e2sa + lphi + ls, gsq[idx] * qw);
      lhs.add(e2sa + 3.0 * (lphi + ls), std::norm(un[idx]) * qw);
      // residual term |F|^2 e^{2 s alpha}
      double Fn = std::norm(ut.at(n, idx) - lap[idx]);
      rhs.add(e2sa, Fn * qw);
    }
    // observation on the monitored faces
    for_each_observed_node(g, w, [&](long idx, double sw) {
      double e2sa = 2.0 * s * w.alpha(idx, t);
      if (e2sa == -kInf) return;
      double lphi = w.log_phi(idx, t);
      double qw = sw * tau;
      rhs.add(e2sa + lphi + ls, gsq[idx] * qw);
      rhs.add(e2sa + 3.0 * (lphi + ls), std::norm(un[idx]) * qw);
      rhs.add(e2sa - lphi - ls, std::norm(ut.at(n, idx)) * qw);
    });
    // conormal data on the remaining face
    for_each_face_node(g, w.unobserved_axis, 1, [&](long idx, double sw) {
      double e2sa = 2.0 * s * w.alpha(idx, t);
      if (e2sa == -kInf) return;
      double lphi = w.log_phi(idx, t);
      double qw = sw * tau;
      double gb = std::norm(normal_derivative(un, idx));
      double gbt = std::norm(normal_derivative(Field(ut.slice(n)), idx));
      rhs.add(e2sa - 2.0 * (lphi + ls), gbt * qw);
      rhs.add(e2sa - 0.5 * (lphi + ls), gb * qw);
      rhs.add(e2sa, gb * qw);  // L2-in-time trace of g e^{s alpha}
    });
  }
  if (lhs.value() == -kInf) return -kInf;
  return lhs.value() - rhs.value();
}

double mfg_carleman_log_ratio(const SpaceTimeField& u, const SpaceTimeField& m,
                              const SpaceTimeWeight& w, double s, double c0,
                              double a0) {
  require_box(u.grid, "mfg_carleman_log_ratio");
  const SpatialGrid& g = u.grid;
  const TimeGrid& tg = u.time;
  const int N = tg.steps;
  const double tau = tg.tau();
  const double ls = std::log(s);
  SpaceTimeField ut = dt_fd(u), mt = dt_fd(m);
  LogSum lhs, rhs;
  for (int n = 1; n < N; ++n) {
    double t = tg.t(n);
    Field un = u.slice(n), mn = m.slice(n);
    Field lap_u = laplacian(un), lap_m = laplacian(mn);
    auto gsqu = grad_sq(un), hsqu = hess_sq(un);
    auto gsqm = grad_sq(mn), hsqm = hess_sq(mn);
    for (long idx = 0; idx < g.size(); ++idx) {
      double e2sa = 2.0 * s * w.alpha(idx, t);
      if (e2sa == -kInf) continue;
      double lphi = w.log_phi(idx, t);
      double qw = g.quad_weight(idx) * tau;
      // second-order block for u
      lhs.add(e2sa, (std::norm(ut.at(n, idx)) + hsqu[idx]) * qw);
      lhs.add(e2sa + 2.0 * (lphi + ls), gsqu[idx] * qw);
      lhs.add(e2sa + 4.0 * (lphi + ls), std::norm(un[idx]) * qw);
      // first-order block for m
      lhs.add(e2sa - lphi - ls,
              (std::norm(mt.at(n, idx)) + hsqm[idx]) * qw);
      lhs.add(e2sa + lphi + ls, gsqm[idx] * qw);
      lhs.add(e2sa + 3.0 * (lphi + ls), std::norm(mn[idx]) * qw);
      // residuals of the coupled pair
      cplx Fv = ut.at(n, idx) + lap_u[idx] + a0 * un[idx] - c0 * mn[idx];
      cplx Gv = mt.at(n, idx) - lap_m[idx] - lap_u[idx];
      rhs.add(e2sa + lphi + ls, std::norm(Fv) * qw);
      rhs.add(e2sa, std::norm(Gv) * qw);
    }
  }
  // unweighted observation traces on the monitored faces
  double traces = observed_h1_trace_sq(u, w) + observed_h1_trace_sq(m, w);
  rhs.add(0.0, traces);
  if (lhs.value() == -kInf) return -kInf;
  return lhs.value() - rhs.value();
}

namespace {

RatioReport ratio_report(std::vector<double> s_ladder,
                         std::vector<double> max_log_ratio) {
  RatioReport r;
  r.s_ladder = std::move(s_ladder);
  r.max_log_ratio = std::move(max_log_ratio);
  std::vector<double> lx;
  for (double s : r.s_ladder) lx.push_back(std::log(s));
  r.log_slope = linfit_slope(lx, r.max_log_ratio);
  r.bounded = r.log_slope <= 0.1;
  return r;
}

}  // namespace

RatioReport verify_parabolic_carleman(const SpatialGrid& g,
                                      const TimeGrid& tg, int trials,
                                      const std::vector<double>& s_ladder,
                                      const SpaceTimeWeight& w,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> best(s_ladder.size(), -kInf);
  for (int tr = 0; tr < trials; ++tr) {
    SpaceTimeField u = make_trial(g, tg, rng);
    for (size_t r = 0; r < s_ladder.size(); ++r)
      best[r] =
          std::max(best[r], parabolic_carleman_log_ratio(u, w, s_ladder[r]));
  }
  return ratio_report(s_ladder, std::move(best));
}

RatioReport verify_mfg_carleman(const SpatialGrid& g, const TimeGrid& tg,
                                int trials,
                                const std::vector<double>& s_ladder,
                                const SpaceTimeWeight& w, std::uint64_t seed,
                                double c0, double a0) {
  std::mt19937_64 rng(seed);
  std::vector<double> best(s_ladder.size(), -kInf);
  for (int tr = 0; tr < trials; ++tr) {
    SpaceTimeField u = make_trial(g, tg, rng);
    SpaceTimeField m = make_trial(g, tg, rng);
    for (size_t r = 0; r < s_ladder.size(); ++r)
      best[r] = std::max(
          best[r], mfg_carleman_log_ratio(u, m, w, s_ladder[r], c0, a0));
  }
  return ratio_report(s_ladder, std::move(best));
}

CoupledSolution solve_coupled_linear(const SpatialGrid& g, const TimeGrid& tg,
                                     double c0, const SpaceTimeField& F,
                                     const SpaceTimeField& G, const Field& uT,
                                     const Field& m0) {
  require_box(g, "solve_coupled_linear");
  const long X = g.size();
  const int N = tg.steps;
  const double tau = tg.tau();
  // per-node zero-flux Laplacian stencil
  std::vector<std::vector<std::pair<long, double>>> lap(X);
  for (long idx = 0; idx < X; ++idx) {
    for (int a = 0; a < g.dim; ++a) {
      double ih2 = 1.0 / (g.h(a) * g.h(a));
      long stride = axis_stride(g, a);
      int ijk[3];
      g.unindex(idx, ijk[0], ijk[1], ijk[2]);
      long lo = (ijk[a] == 0) ? idx + stride : idx - stride;
      long hi = (ijk[a] == g.n[a] - 1) ? idx - stride : idx + stride;
      lap[idx].push_back({lo, ih2});
      lap[idx].push_back({hi, ih2});
      lap[idx].push_back({idx, -2.0 * ih2});
    }
  }
  // unknowns: u_0..u_{N-1} then m_1..m_N, Crank-Nicolson collocation
  const long total = 2L * N * X;
  auto u_col = [&](int n, long i) { return static_cast<long>(n) * X + i; };
  auto m_col = [&](int n, long i) {
    return static_cast<long>(N) * X + static_cast<long>(n - 1) * X + i;
  };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(total) * 10);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  auto add = [&](long row, long col, double val) {
    trip.emplace_back(static_cast<int>(row), static_cast<int>(col), val);
  };
  for (int n = 0; n < N; ++n) {
    for (long i = 0; i < X; ++i) {
      long ru = u_col(n, i);          // u-equation row
      long rm = static_cast<long>(N) * X + static_cast<long>(n) * X + i;
      double Fbar = 0.5 * (F.at(n, i).real() + F.at(n + 1, i).real());
      double Gbar = 0.5 * (G.at(n, i).real() + G.at(n + 1, i).real());
      rhs[ru] += Fbar;
      rhs[rm] += Gbar;
      // (u_{n+1} - u_n)/tau + Lap ubar - c0 mbar = Fbar
      add(ru, u_col(n, i), -1.0 / tau);
      if (n + 1 <= N - 1)
        add(ru, u_col(n + 1, i), 1.0 / tau);
      else
        rhs[ru] -= uT[i].real() / tau;
      for (auto [col, val] : lap[i]) {
        add(ru, u_col(n, col), 0.5 * val);
        if (n + 1 <= N - 1)
          add(ru, u_col(n + 1, col), 0.5 * val);
        else
          rhs[ru] -= 0.5 * val * uT[col].real();
      }
      if (n >= 1)
        add(ru, m_col(n, i), -0.5 * c0);
      else
        rhs[ru] += 0.5 * c0 * m0[i].real();
      add(ru, m_col(n + 1, i), -0.5 * c0);
      // (m_{n+1} - m_n)/tau - Lap mbar - Lap ubar = Gbar
      if (n >= 1)
        add(rm, m_col(n, i), -1.0 / tau);
      else
        rhs[rm] -= m0[i].real() / tau;
      add(rm, m_col(n + 1, i), 1.0 / tau);
      for (auto [col, val] : lap[i]) {
        if (n >= 1)
          add(rm, m_col(n, col), -0.5 * val);
        else
          rhs[rm] += 0.5 * val * m0[col].real();
        add(rm, m_col(n + 1, col), -0.5 * val);
        add(rm, u_col(n, col), -0.5 * val);
        if (n + 1 <= N - 1)
          add(rm, u_col(n + 1, col), -0.5 * val);
        else
          rhs[rm] += 0.5 * val * uT[col].real();
      }
    }
  }
  Eigen::SparseMatrix<double> A(total, total);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_coupled_linear: factorization failed");
  Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_coupled_linear: solve failed");
  CoupledSolution out{SpaceTimeField(g, tg), SpaceTimeField(g, tg)};
  for (long i = 0; i < X; ++i) {
    out.u.at(N, i) = uT[i].real();
    out.m.at(0, i) = m0[i].real();
  }
  for (int n = 0; n < N; ++n)
    for (long i = 0; i < X; ++i) {
      out.u.at(n, i) = sol[u_col(n, i)];
      out.m.at(n + 1, i) = sol[m_col(n + 1, i)];
    }
  return out;
}

namespace {

double space_l2(const Field& f) { return f.l2(); }

// lateral H1 traces over the faces observed by the standard box weight
double standard_trace_sq(const SpaceTimeField& f) {
  SpaceTimeWeight w;
  w.unobserved_axis = 0;
  w.eta = Field(f.grid);
  return observed_h1_trace_sq(f, w);
}

}  // namespace

StabilityReport lipschitz_source_experiment(const SpatialGrid& g,
                                            const TimeGrid& tg, double t0,
                                            int trials, std::uint64_t seed,
                                            double c0) {
  require_box(g, "lipschitz_source_experiment");
  const double T = tg.T;
  auto q1 = [&](double x0, double t) {
    return (1.0 + 0.2 * x0 / g.side[0]) * std::cos(pi * t / T);
  };
  auto q2 = [&](double x0, double t) {
    return (1.0 - 0.2 * x0 / g.side[0]) * (1.0 + 0.25 * std::sin(pi * t / T));
  };
  // the recovery theory needs the temporal profiles nonzero at t0
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    double x0 = g.coord(0, i);
    if (std::abs(q1(x0, t0)) < 0.1 || std::abs(q2(x0, t0)) < 0.1)
      throw std::invalid_argument(
          "lipschitz_source_experiment: profile vanishes at t0");
  }
  int n0 = static_cast<int>(std::lround(t0 / tg.tau()));
  n0 = std::clamp(n0, 0, tg.steps);
  std::mt19937_64 rng(seed);
  StabilityReport rep;
  Field zero(g);
  for (int tr = 0; tr < trials; ++tr) {
    Field f1 = make_spatial_trial(g, rng);
    Field f2 = make_spatial_trial(g, rng);
    SpaceTimeField F(g, tg), G(g, tg);
    for (int n = 0; n <= tg.steps; ++n) {
      double t = tg.t(n);
      for (long idx = 0; idx < g.size(); ++idx) {
        int i, j, k;
        g.unindex(idx, i, j, k);
        double x0 = g.coord(0, i);
        F.at(n, idx) = q1(x0, t) * f1[idx].real();
        G.at(n, idx) = q2(x0, t) * f2[idx].real();
      }
    }
    CoupledSolution sol = solve_coupled_linear(g, tg, c0, F, G, zero, zero);
    double num = space_l2(f1) + space_l2(f2);
    double den = std::sqrt(field_h2_sq(sol.u.slice(n0))) +
                 std::sqrt(field_h2_sq(sol.m.slice(n0))) +
                 std::sqrt(standard_trace_sq(sol.u)) +
                 std::sqrt(standard_trace_sq(sol.m));
    rep.ratios.push_back(num / den);
  }
  rep.max_ratio = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  return rep;
}

StabilityReport forward_stability_experiment(const SpatialGrid& g,
                                             const TimeGrid& tg, double eps,
                                             int trials, std::uint64_t seed,
                                             double c0) {
  require_box(g, "forward_stability_experiment");
  std::mt19937_64 rng(seed);
  StabilityReport rep;
  const int N = tg.steps;
  const double tau = tg.tau();
  for (int tr = 0; tr < trials; ++tr) {
    SpaceTimeField F = make_trial(g, tg, rng);
    SpaceTimeField G = make_trial(g, tg, rng);
    Field uT = make_spatial_trial(g, rng);
    Field m0 = make_spatial_trial(g, rng);
    CoupledSolution sol = solve_coupled_linear(g, tg, c0, F, G, uT, m0);
    // interior H^{2,1} energy over Omega x (eps, T - eps)
    double interior = 0.0;
    SpaceTimeField ut = dt_fd(sol.u), mt = dt_fd(sol.m);
    for (int n = 0; n <= N; ++n) {
      double t = tg.t(n);
      if (t < eps || t > tg.T - eps) continue;
      double wt = tau;
      Field un = sol.u.slice(n), mn = sol.m.slice(n);
      auto gsqu = grad_sq(un), hsqu = hess_sq(un);
      auto gsqm = grad_sq(mn), hsqm = hess_sq(mn);
      for (long idx = 0; idx < g.size(); ++idx) {
        double qw = g.quad_weight(idx) * wt;
        interior += qw * (std::norm(un[idx]) + gsqu[idx] + hsqu[idx] +
                          std::norm(ut.at(n, idx)) + std::norm(mn[idx]) +
                          gsqm[idx] + hsqm[idx] + std::norm(mt.at(n, idx)));
      }
    }
    double num = std::sqrt(interior);
    double den = F.l2() + G.l2() + std::sqrt(standard_trace_sq(sol.u)) +
                 std::sqrt(standard_trace_sq(sol.m));
    rep.ratios.push_back(num / den);
  }
  rep.max_ratio = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  return rep;
}

HolderReport holder_stability_experiment(const MFGProblem& base, double eps,
                                         int k,
                                         const std::vector<double>& deltas,
                                         const MFGOpts& opts) {
  if (base.terminal_cost)
    throw std::invalid_argument(
        "holder_stability_experiment: base problem must use a fixed terminal "
        "field");
  const TimeGrid& tg = base.time;
  const SpatialGrid& g = base.grid;
  HolderReport rep;
  rep.rho_theory = (1.0 / 6.0) * std::pow((eps + 1.0) / (tg.T + 1.0), k);
  MFGSolution sol0 = solve_mfg(base, opts);
  Field bump = sample(g, [&](double x0, double = 0.0, double = 0.0) {
    return std::cos(2.0 * pi * x0 / g.side[0]);
  });
  const int N = tg.steps;
  const double tau = tg.tau();
  for (double d : deltas) {
    MFGProblem pert = base;
    pert.psi = base.psi + cplx(d) * bump;
    MFGSolution sol = solve_mfg(pert, opts);
    double acc = 0.0;
    for (int n = 0; n <= N; ++n) {
      double t = tg.t(n);
      if (t < eps) continue;
      double wt = tau * ((n == N || t - eps < 0.5 * tau) ? 0.5 : 1.0);
      Field du = sol.u.slice(n) - sol0.u.slice(n);
      Field dm = sol.m.slice(n) - sol0.m.slice(n);
      auto gu = grad_sq(du);
      auto gm = grad_sq(dm);
      for (long idx = 0; idx < g.size(); ++idx)
        acc += wt * g.quad_weight(idx) *
               (std::norm(du[idx]) + gu[idx] + std::norm(dm[idx]) + gm[idx]);
    }
    rep.delta.push_back(d);
    rep.diff.push_back(std::sqrt(acc));
    double lam = std::log(d) / (3.0 * (tg.T + 1.0));
    if (lam < 1.0) {
      lam = 1.0;
      rep.lambda_clamped = true;
    }
    rep.lambda_schedule.push_back(lam);
  }
  std::vector<double> lx, ly;
  for (size_t i = 0; i < rep.delta.size(); ++i) {
    lx.push_back(std::log(rep.delta[i]));
    ly.push_back(std::log(rep.diff[i]));
  }
  if (lx.size() >= 2) rep.rho_hat = linfit_slope(lx, ly);
  return rep;
}

}  // namespace mfglab
