#pragma once
// Coupled forward solver for the mean field game system
//   -d_t u - Lap u + 1/2 kappa |grad u|^2 = F(x, m),  u(., T) = G(m(., T))
//    d_t m - Lap m - div(m kappa grad u)  = 0,        m(., 0) = m0,
// its stationary (ergodic) counterpart, the inclusion variant, and the
// measurement maps taken on solutions.
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfglab/costs.hpp"
#include "mfglab/heat.hpp"

namespace mfglab {

enum class BoundaryKind { Periodic, Neumann, NeumannDirichletData };
enum class InclusionBC { Dirichlet, Neumann };

struct MFGProblem {
  SpatialGrid grid;
  TimeGrid time;
  Hamiltonian H;
  CostModel running_cost;
  // optional explicit running cost F(x, t) added on top of running_cost(m)
  std::optional<SpaceTimeField> running_source;
  // terminal condition: either a cost G applied to m(., T) or a fixed field
  std::optional<PowerSeriesCost> terminal_cost;
  Field psi;  // used when terminal_cost is absent
  Field m0;
  BoundaryKind bc = BoundaryKind::Periodic;
  std::optional<std::vector<std::uint8_t>> inclusion_mask;
  InclusionBC inclusion_bc = InclusionBC::Dirichlet;
  double smallness_delta = 0.5;  // warn when ||m0 - base|| exceeds this
};

struct MFGOpts {
  int max_iters = 200;
  double damping = 0.5;
  double tol = 1e-8;
  int newton_max = 30;
  double newton_tol = 1e-12;
  HeatOpts heat;
};

struct MFGSolution {
  SpaceTimeField u;
  SpaceTimeField m;
  std::vector<double> change_log;  // successive-iterate L2 change per step
  bool converged = false;
  double hjb_res = 0.0;  // midpoint-collocation certificates
  double fp_res = 0.0;
  std::string warning;
  // context carried for the measurement maps and the energy identity
  BoundaryKind bc = BoundaryKind::Periodic;
  Field kappa;
  std::optional<std::vector<std::uint8_t>> inclusion_mask;
};

MFGSolution solve_mfg(const MFGProblem& p, const MFGOpts& opts = {});
// Same Picard loop with the inclusion-mask boundary condition imposed;
// validates that the mask is strictly interior with a connected exterior.
MFGSolution solve_with_inclusion(const MFGProblem& p, const MFGOpts& opts = {});

struct StationarySolution {
  double lambda = 0.0;
  Field u;  // normalized so Int u = 0
  Field m;  // = e^{-u} / Int e^{-u}
  double hjb_res = 0.0;
  double fp_res = 0.0;
  int outer_iters = 0;
};

// -Lap u + 1/2 |grad u|^2 + lambda = F(x, m), -Lap m - div(m grad u) = 0 on a
// torus, via the Cole-Hopf reduction -2 Lap w + F w = lambda w, u = -2 log w.
StationarySolution solve_stationary_ergodic(const SpatialGrid& g,
                                            const CostModel& F,
                                            double tol = 1e-10);

// --- measurement maps ---

enum class MeasurementKind {
  TorusInitialValue,  // u(., 0)
  BoundedPair,        // (u on Sigma over time, u(., 0))
  ConstantTerminal,   // (u(., 0), m(., T))
  Cauchy,             // (m, d_nu m) on Sigma over time
  AnomalyDirichlet,   // (Int_Sigma d_nu u h dx dt, d_nu m on Sigma)
  AnomalyNeumann,     // (Int_Sigma u g dx dt, m on Sigma)
};

// time series of values on the outer-boundary nodes, time-major
struct BoundaryTrace {
  std::vector<long> nodes;
  std::vector<double> weights;  // surface quadrature weight per node
  TimeGrid time;
  std::vector<cplx> values;
  cplx& at(int nstep, size_t b) { return values[nstep * nodes.size() + b]; }
  const cplx& at(int nstep, size_t b) const {
    return values[nstep * nodes.size() + b];
  }
  double l2_distance(const BoundaryTrace& o) const;
};

struct MeasurementRecord {
  MeasurementKind kind;
  std::vector<Field> fields;
  std::vector<BoundaryTrace> traces;
  std::vector<cplx> scalars;
};

MeasurementRecord measure(const MFGSolution& sol, MeasurementKind kind,
                          const SpaceTimeField* weight = nullptr);

// boundary records of an arbitrary space-time field (box grids only)
BoundaryTrace boundary_values(const SpaceTimeField& f);
BoundaryTrace boundary_normal_derivative(const SpaceTimeField& f);

// Discrete energy identity of the system: the endpoint/kinetic aggregate
// against Int_Q F(x, m) m dx dt; gap is at the residual level for any
// converged solution on a torus.
struct EnergyPairing {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};
EnergyPairing energy_pairing_check(const MFGSolution& sol, const CostModel& F);

// mask sanity: strictly interior, exterior connected (flood fill)
void validate_inclusion_mask(const SpatialGrid& g,
                             const std::vector<std::uint8_t>& mask);

}  // namespace mfglab
