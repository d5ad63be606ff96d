#pragma once
// Forward/backward heat solvers (Crank-Nicolson, midpoint form), the heat
// kernel, Neumann eigenpairs, and probe factories.
#include <cstdint>
#include <optional>

#include "mfglab/grid.hpp"
#include "mfglab/ops.hpp"

namespace mfglab {

enum class Direction { Forward, Backward };

struct EigenPair {
  double beta = 0.0;  // discrete eigenvalue of -Laplacian (Neumann)
  Field phi;          // L2-normalized eigenfunction
  int index = 0;
};

struct HeatTrajectory {
  SpaceTimeField w;
  Direction direction = Direction::Forward;
  double residual_max = 0.0;  // midpoint-collocation residual of the scheme
};

struct HeatOpts {
  enum class Scheme { Auto, CrankNicolson, SpectralExact };
  Scheme scheme = Scheme::Auto;
  // number of initial steps replaced by two half-steps of implicit Euler
  // (Rannacher start, restores positivity for rough data)
  int rannacher_steps = 0;
  double inner_tol = 1e-13;  // fixed-point tolerance of the spectral solve
  int inner_max_iters = 200;
};

struct HeatProblem {
  SpatialGrid grid;
  TimeGrid time;
  Direction direction = Direction::Forward;
  Field data;  // initial (forward) or terminal (backward) values
  const SpaceTimeField* source = nullptr;
  const std::vector<SpaceTimeField>* drift = nullptr;  // per-axis components
  // divergence-form drift: contributes +div(w b) through the conservative
  // divergence stencil, so the quadrature-weighted mass of that term is 0
  const std::vector<SpaceTimeField>* div_drift = nullptr;
  const SpaceTimeField* potential = nullptr;
  // nodes held at zero (inclusion boundaries and/or outer Dirichlet data)
  const std::vector<std::uint8_t>* dirichlet_mask = nullptr;
};

HeatTrajectory solve_heat(const HeatProblem& p, const HeatOpts& opts = {});

// Fundamental solution (4 pi t)^{-n/2} exp(-|x|^2 / 4t).
double heat_kernel(const double* x, double t, int n);

// Ascending eigenpairs of the discrete Neumann Laplacian; first is (0, const).
std::vector<EigenPair> neumann_eigenpairs(const SpatialGrid& g, int count);

// --- probe factories ---
struct Probe {
  SpaceTimeField w;
  double residual = 0.0;
};

// exp(-2 pi i xi.x - 4 pi^2 |xi|^2 t) + M on a torus (forward heat solution)
Probe probe_torus_heat(const SpatialGrid& g, const TimeGrid& tg,
                       const std::array<int, 3>& xi, double M);
// exp(-|xi|^2 t - i x.xi), xi real vector (forward heat solution)
Probe probe_adjoint_exponential(const SpatialGrid& g, const TimeGrid& tg,
                                const std::array<double, 3>& xi);
// e^{lambda t} g with lambda = -beta (forward, sign=-1) or +beta (backward,
// sign=+1); throws if g fails the eigenfunction residual check.
Probe probe_eigen_mode(const SpatialGrid& g, const TimeGrid& tg, int sign,
                       const EigenPair& ep);

}  // namespace mfglab
