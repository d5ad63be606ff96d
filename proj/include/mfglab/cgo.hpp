#pragma once
// Complex geometric optics solutions: static pairs with null complex
// frequencies, parabolic (space-time) variants, and corner exponentials with
// moment-decay diagnostics.
#include <array>
#include <functional>

#include "mfglab/grid.hpp"
#include "mfglab/ops.hpp"

namespace mfglab {

using CVec3 = std::array<cplx, 3>;

// unconjugated complex dot product
inline cplx cdot(const CVec3& a, const CVec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// The null pair attached to an integer mode k in three dimensions:
//   xi_1 = i k/2 + alpha a + i beta b,   xi_2 = i k/2 - alpha a - i beta b
// with {k, a, b} orthogonal, |a| = |b| = |k|, alpha^2 - beta^2 = 1/4 and
// alpha^2 + beta^2 = 4 R^2. Both factors are null (xi.xi = 0), they sum to
// ik, and xi.conj(xi) = (1/4 + 4R^2)|k|^2. Requires R >= 1/4.
struct XiPair {
  CVec3 xi1, xi2;
  std::array<double, 3> a, b;  // the deterministic orthogonal companions
};
XiPair build_xi_pair(const std::array<int, 3>& k, double R);

// Solve L_xi omega = -H (1 + omega) with L_xi = Lap + 2 xi . grad. H is
// carried onto an extension box of twice the side under a flat-top smooth
// window that is identically one on the original cell, and L_xi is inverted
// spectrally there (symbol 1/(-4 pi^2 |m|^2 + 4 pi i xi.m)). Constants lie in
// the kernel of L_xi, so the zero mode of each right-hand side is matched by
// a linear corrector gamma p(x) with L_xi p = 1; the returned omega is the
// sum of the periodic part and that corrector. Residuals are meaningful on
// the original cell, where the window equals one.
struct OmegaSolution {
  Field omega;           // periodic part + corrector, on the extension grid
  Field omega_periodic;  // periodic part alone (what the symbol inverted)
  cplx gamma = 0.0;      // corrector amplitude
  double l2_norm = 0.0;
  double contraction = 0.0;  // empirical ratio of successive update norms
  int iters = 0;
  bool converged = false;
};
OmegaSolution solve_omega(const Field& H, const CVec3& xi);

// residual of the conjugated equation L_xi omega + H omega + H, evaluated on
// the extension grid; only values over the original cell are asserted
Field omega_equation_residual(const Field& H, const CVec3& xi,
                              const OmegaSolution& sol);

// copy the values over the original cell out of an extension-grid field
// (the extension shares the cell's node spacing, so this is exact)
Field restrict_extension(const Field& ext_field, const SpatialGrid& cell);

// --- parabolic CGO ---
struct ParabolicCgoSpec {
  SpatialGrid grid;  // periodic or box, dim >= 2; on a box the remainder is
                     // marched with homogeneous Dirichlet walls so the
                     // transported mass leaves the domain
  TimeGrid time;
  std::array<double, 3> zeta{1, 0, 0};  // unit drift direction
  std::array<double, 3> xi{0, 1, 0};    // spatial frequency, zeta.xi = 0
  double tau = 0.0;                     // temporal frequency
  bool window = true;  // multiply by a smooth bump supported in (0, T)
  std::vector<double> rho_ladder = {8, 16, 32, 64};
  const std::vector<Field>* phi = nullptr;  // stationary drift, per axis
  const Field* q = nullptr;                 // stationary potential
};

struct ParabolicCgoResult {
  std::vector<double> rho;
  std::vector<double> z_norm;        // remainder size per ladder point
  std::vector<double> lead_residual; // residual of the windowed leading term
  SpaceTimeField lead;               // chi(t) e^{-i(x.xi + t tau)} amplitude
  SpaceTimeField z_last;             // remainder at the largest rho
};
// Leading amplitude chi(t) a(x) e^{-i(x,t).(xi,tau)} with the transport term
// 2 rho zeta.grad annihilated by zeta perpendicular to xi; the remainder z
// solves the conjugated equation with the leading-order defect as source.
ParabolicCgoResult build_parabolic_cgo(const ParabolicCgoSpec& spec);

/// exp(s/2) with s = integral_0^S zeta.phi(x + t zeta) dt: the transported
// drift factor of the parabolic amplitude (the line is traced along zeta;
// the Fourier direction xi is the flagged alternative).
double drift_line_factor(const std::function<std::array<double, 3>(
                             const std::array<double, 3>&)>& phi,
                         const std::array<double, 3>& x,
                         const std::array<double, 3>& zeta, double S,
                         int quad_points = 2048);

// --- corner CGO ---
struct CornerSpec {
  int dim = 2;                            // 2 or 3
  std::array<double, 3> apex{0, 0, 0};
  std::array<double, 3> axis{1, 0, 0};    // unit cone axis
  double half_angle = 0.6;                // < pi/2
  double height = 1.0;                    // truncation radius h
  // xi = -axis and a unit xi_perp are used in w = e^{tau (xi + i xi_perp).(x-apex)};
  // rho_hat = cos(half_angle) bounds xi.(x-apex)/|x-apex| <= -rho_hat on the cone
  int angular_points = 256;
  int radial_points = 200;
};

struct CornerMoments {
  std::vector<double> tau;
  std::vector<cplx> I0;          // integral of w over the truncated cone
  std::vector<cplx> I_alpha;     // integral of |x-apex|^alpha w
  std::vector<double> cap_norm;  // L2 norm of d_nu w on the spherical cap
  double alpha = 0.5;
  double rho_hat = 0.0;
  double slope_I0 = 0.0;     // log-log decay rate, expected -dim
  double slope_Ialpha = 0.0; // expected -(alpha + dim)
};
CornerMoments corner_cgo_moments(const CornerSpec& spec,
                                 const std::vector<double>& tau_ladder,
                                 double alpha = 0.5);

}  // namespace mfglab
