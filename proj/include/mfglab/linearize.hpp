#pragma once
// Successive linearization of the MFG system around a certified background:
// order-1 and order-2 linearized solves (consistent with the nonlinear
// discretization, so they are derivatives of the discrete solution map) and
// the Frechet-derivative validation ladders.
#include "mfglab/mfg.hpp"

namespace mfglab {

// A certified zero background (u = m = 0) around which the torus recovery
// problems linearize.
MFGSolution zero_background(const SpatialGrid& g, const TimeGrid& tg,
                            const Hamiltonian& H,
                            BoundaryKind bc = BoundaryKind::Periodic);

// perturbation directions: initial density and/or terminal value
struct LinearizedData {
  const Field* f1 = nullptr;  // direction of m(., 0)
  const Field* h1 = nullptr;  // direction added to u(., T)
};

struct LinearizedSolution {
  int order = 1;
  SpaceTimeField u;
  SpaceTimeField m;
  double residual = 0.0;  // worst midpoint-collocation residual of the system
  bool converged = true;
};

// -d_t u1 - Lap u1 + kappa grad u0 . grad u1 = F1 m1
//  d_t m1 - Lap m1 - div(m1 kappa grad u0) - div(m0 kappa grad u1) = 0
// u1(T) = G1 m1(T) + h1, m1(0) = f1. Decoupled solves when the background
// vanishes; otherwise block Gauss-Seidel iteration on the two linear
// equations (converges in the small-data regime).
LinearizedSolution solve_linearized_order1(const MFGSolution& background,
                                           const Hamiltonian& H,
                                           const Field& F1, const Field& G1,
                                           const LinearizedData& data);

// Mixed second derivative in two directions with known order-1 pairs:
// -d_t U - Lap U + kappa grad u0 . grad U + kappa grad u1 . grad u2
//     = F1 M + F2 m1 m2
//  d_t M - Lap M - div(M kappa grad u0) - div(m0 kappa grad U)
//     - div(m1 kappa grad u2) - div(m2 kappa grad u1) = 0
// U(T) = G1 M(T) + G2 m1(T) m2(T), M(0) = 0.
LinearizedSolution solve_linearized_order2(const MFGSolution& background,
                                           const Hamiltonian& H,
                                           const LinearizedSolution& l1,
                                           const LinearizedSolution& l2,
                                           const Field& F1, const Field& F2,
                                           const Field& G1, const Field& G2);

struct FrechetReport {
  std::vector<double> eps;
  std::vector<double> rem1;  // ||S(eps f) - S(0) - eps A f||
  std::vector<double> rem2;  // ... - eps^2/2 A2[f,f]
  double slope1 = 0.0;
  double slope2 = 0.0;
};

// Runs the nonlinear solver over the epsilon ladder in the given
// initial-density direction and fits log-log remainder slopes (2 certifies
// the first-order system, 3 the second-order one). The linearized
// coefficients are read off the problem's power-series costs.
FrechetReport frechet_validate(const MFGProblem& base, const Field& direction,
                               const std::vector<double>& eps_ladder,
                               const MFGOpts& opts = {});

// least-squares slope of log(y) against log(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mfglab
