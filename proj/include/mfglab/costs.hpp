#pragma once
// Running/terminal cost representations (local power series, nonlocal
// kernel), the quadratic Hamiltonian, equation residuals in the
// midpoint-collocation sense of the time stepper, and a small library of
// closed-form solution vectors used as ground truth.
#include <string>
#include <variant>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/ops.hpp"

namespace mfglab {

// U(x, z) = sum_{k=1..K} U_k(x) (z - base)^k / k!   (so U(x, base) = 0)
struct PowerSeriesCost {
  double base = 0.0;  // expansion state: 0 or 1
  std::vector<Field> coeff;  // coeff[k-1] = U_k
  double radius = 0.5;  // admissible |z - base|

  // geometric-majorant bound on the dropped tail at |z - base| <= r
  double tail_bound(double r) const;
};

// (Km)(x) = Int K(x, y) m(y) dy, with Int K(x, y) dy = 0 for every x.
struct NonlocalKernelCost {
  SpatialGrid grid;
  std::vector<double> K;  // dense, row x (size^2 entries)

  double at(long x, long y) const { return K[x * grid.size() + y]; }
  double mean_zero_defect() const;  // max_x |Int K(x,y) dy|
};

using CostModel = std::variant<PowerSeriesCost, NonlocalKernelCost>;

// H(x, p) = 1/2 kappa(x) p.p (unconjugated dot, so complex closed forms
// stay holomorphic in the fields)
struct Hamiltonian {
  Field kappa;

  static Hamiltonian constant(const SpatialGrid& g, double k = 1.0);
  void validate() const;  // throws unless Re(kappa) > 0 everywhere
};

Field eval_cost(const PowerSeriesCost& c, const Field& m);
Field eval_cost(const NonlocalKernelCost& c, const Field& m);
Field eval_cost(const CostModel& c, const Field& m);
// d/dz U(x, z) at z = m (power series only; kernel form is linear)
Field eval_cost_derivative(const PowerSeriesCost& c, const Field& m);

// 1/2 kappa sum_i p_i^2 for a gradient vector p
Field hamiltonian_value(const Hamiltonian& H, const std::vector<Field>& p);

// Residual of -d_t u - Lap u + H(x, grad u) - F at the time-interval
// midpoints, with every spatial term evaluated on the averaged slices
// (u_n + u_{n+1})/2 -- the collocation form of the Crank-Nicolson stepper.
// Slice n (n < steps) holds the interval-n residual; the last slice is 0.
// Box grids report interior nodes only.
SpaceTimeField hjb_residual(const SpaceTimeField& u, const SpaceTimeField& m,
                            const CostModel& F, const Hamiltonian& H);
// same, with the running cost given directly as a space-time field F(x,t)
SpaceTimeField hjb_residual(const SpaceTimeField& u,
                            const SpaceTimeField& F_of_xt,
                            const Hamiltonian& H);
// Residual of d_t m - Lap m - div(m kappa grad u), same convention.
SpaceTimeField fp_residual(const SpaceTimeField& m, const SpaceTimeField& u,
                           const Hamiltonian& H);

// A closed-form (u, m, F, G) vector with recomputable residuals.
struct ClosedFormVector {
  std::string name;
  std::string domain_tag;  // "torus" | "box" | "torus-stationary"
  SpatialGrid grid;
  TimeGrid time;
  SpaceTimeField u;
  bool has_m = false;
  SpaceTimeField m;
  SpaceTimeField F;  // running cost along the solution, as a field of (x,t)
  Field G;           // terminal value u(., T)
  Hamiltonian H;

  double hjb_residual_max() const;
  double fp_residual_max() const;  // 0 when has_m is false
};

// Ground-truth vectors: the trivial pair, both one-dimensional
// non-uniqueness pairs, and the ergodic (stationary) pair.
std::vector<ClosedFormVector> closed_form_library(int nx = 64, int steps = 256);

}  // namespace mfglab
