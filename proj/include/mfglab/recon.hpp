#pragma once
// Coefficient reconstruction from measurement data: torus F/G recovery from
// Fourier-mode probes, bounded-domain kappa/F/kernel recovery from Cauchy
// data, constant-coupling probe modes and decay estimation, anomaly
// discrimination, and stationary recovery through complex exponentials.
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "mfglab/cgo.hpp"
#include "mfglab/heat.hpp"
#include "mfglab/mfg.hpp"

namespace mfglab {

// ------------------------------------------------------------- torus F / G

// measurement access: the map m0 |-> u(., 0) of the coupled system
using TorusOracle = std::function<Field(const Field& m0)>;

// the two coefficient functions of the assembled 2x2 mode systems,
//   A(s) f_hat + B(s) g_hat = d,  s = |zeta1|^2 + |zeta2|^2
double fg_coeff_A(double s, double T);
double fg_coeff_B(double s, double T);

struct ModeSystem {
  std::array<int, 3> xi{0, 0, 0};  // target mode
  int order = 1;
  double s1 = 0.0, s2 = 0.0;  // the two admissible probe sums
  cplx det = 0.0;
  double cond = 0.0;      // sigma_max / sigma_min of the 2x2 matrix
  double residual = 0.0;  // back-substitution consistency of the solve
};

struct TorusFGResult {
  std::vector<Field> F;  // F^{(k)}, k = 1..K_max
  std::vector<Field> G;
  std::vector<ModeSystem> systems;
};

// Probes the system with initial densities eps (e^{-2 pi i zeta.x} + M),
// M in {1, 2}; offsets are removed by exact subtraction, adjoint heat
// exponentials turn the linearized data into Fourier systems per target
// mode, and order two recurses on the order-one fields.
TorusFGResult recover_FG_torus(const TorusOracle& oracle,
                               const SpatialGrid& g, const TimeGrid& tg,
                               int K_max, int mode_cutoff, double eps = 1e-3);

// ------------------------------------------------ bounded-domain recovery

// Cauchy record of the value function for one experiment
struct CauchyData {
  Field u0;                   // u(., 0)
  BoundaryTrace u_boundary;   // u on the lateral boundary over time
  BoundaryTrace du_boundary;  // d_nu u on the lateral boundary over time
};
// measurement access: (terminal data psi, initial density m0) |-> Cauchy
// record of the coupled system's value function
using BoundedOracle =
    std::function<CauchyData(const Field& psi, const Field& m0)>;

struct CoverageField {
  Field value;
  std::vector<std::uint8_t> covered;  // 1 where the division floor was met
  double coverage = 0.0;              // covered fraction
};

// Terminal probes psi = +-eps e^{beta T} g around the zero background make
// the first order kappa-independent and the second order's source kappa
// |grad g|^2 e^{2 beta t}. Duality against heat-evolved cosine modes (the
// discrete counterparts of e^{-|xi|^2 t - i x.xi}, exact at the scheme
// level) gives moments of kappa |grad g|^2 up to cosine mode xi_cutoff per
// axis; the moment system is solved and the result divided where |grad
// g|^2 clears the floor. Probes merge coverage.
CoverageField recover_kappa_bounded(const BoundedOracle& oracle,
                                    const SpatialGrid& g, const TimeGrid& tg,
                                    const std::vector<EigenPair>& probes,
                                    int xi_cutoff, double eps = 1e-3,
                                    double grad_floor_rel = 1e-6);

// Constant initial-density probes (m^{(1)} = 1); order one isolates
// int_Q F^{(1)} omega from the measurement moments, order two subtracts the
// computable density correction and the Hamiltonian quadratic term.
// kappa must be known (recovered first).
std::vector<Field> recover_F_bounded(const BoundedOracle& oracle,
                                     const SpatialGrid& g, const TimeGrid& tg,
                                     const Field& kappa, int K_max,
                                     int xi_cutoff, double eps = 1e-3);

struct KernelResult {
  NonlocalKernelCost kernel;
  std::vector<Field> coeff;    // c_i(x) against eigenfunction g_i(y)
  double mean_zero_defect = 0.0;
};

// Eigenfunction probes m0 = eps (g_i + 2): the mean-zero kernel ignores the
// offset, each probe isolates the coefficient field (K g_i)(x) from the
// measurement moments, and the kernel reassembles as sum_i c_i(x) g_i(y).
KernelResult recover_kernel_nonlocal(const BoundedOracle& oracle,
                                     const SpatialGrid& g, const TimeGrid& tg,
                                     int eigen_count, int xi_cutoff,
                                     double eps = 1e-3);

// ------------------------------------- constant-coupling probes and decay

struct ProbePair {
  double lambda = 0.0;  // sqrt(beta^2 + c beta)
  double k = 0.0;       // beta - lambda
  double D = 0.0;       // c / (k (c + k))
  SpaceTimeField m;     // (-lambda e^{-lambda t} + D e^{lambda t}) phi_i
  SpaceTimeField rho;   // time reflection of m
  double residual_m = 0.0;    // collocation residuals of the coupled pair
  double residual_rho = 0.0;
};

// The explicit mode pair of the linearized system around background (0, 1)
// with constant coupling F^{(1)} = c; rejects c = 0 (degenerate k).
ProbePair build_probe_pair_conpb(double c, const EigenPair& mode,
                                 const TimeGrid& tg);

// quadrature of int_Q (F1 - F2) m2 rho dx dt
cplx key_pairing(const Field& F1, const Field& F2, const SpaceTimeField& m2,
                 const SpaceTimeField& rho);

struct DecayEstimate {
  double c = 0.0;
  double lambda = 0.0;
  double fit_residual = 0.0;  // relative L2 misfit of the fitted curve
};

// Projects the density trajectory onto an eigenmode, fits
// a e^{-lambda t} + b e^{lambda t} in least squares over lambda, and
// inverts lambda = sqrt(beta^2 + c beta).
DecayEstimate estimate_c_from_decay(const SpaceTimeField& m_traj,
                                    const EigenPair& mode);

// -------------------------------------------------- anomaly discrimination

struct AnomalyReport {
  double distance = 0.0;  // L2 distance of the two boundary records
  bool positive1 = false;  // interior positivity on the exterior of D1
  bool positive2 = false;
  BoundaryTrace record1, record2;
};

// Solves the first-order density problem (heat flow vanishing on the anomaly
// boundary; Dirichlet kind also pins the outer boundary) for each mask from
// positive initial data g1 and compares the outer-boundary records:
// normal-derivative traces for the Dirichlet kind, value traces for the
// Neumann kind.
AnomalyReport anomaly_discriminate(const SpatialGrid& g, const TimeGrid& tg,
                                   const std::vector<std::uint8_t>& D1,
                                   const std::vector<std::uint8_t>& D2,
                                   InclusionBC kind, const Field& g1);

// ------------------------------------------- stationary recovery via CGO

// measurement access: test function phi |-> int (F^{(1)} m0) phi dx
using PairingOracle = std::function<cplx(const Field& test)>;

struct StationaryCgoResult {
  std::vector<std::array<int, 3>> modes;
  std::vector<cplx> fhat;  // extrapolated Fourier data of F^{(1)} m0
  // |data(R) - limit| magnitudes per mode per ladder point
  std::vector<std::vector<double>> correction;
  Field f;   // F^{(1)} m0
  Field F1;  // divided by m0
};

// Schrodinger potential of the e^{-u0/2} conjugation:
// Delta e^{-u0/2} = V e^{-u0/2} with V = |grad u0|^2/4 - Lap u0 / 2.
Field conjugation_potential(const Field& u0);

// For each mode k, pairs the data against e^{2 pi i k.x}(1 + omega1)(1 + omega2)
// built from the null pair at increasing R, extrapolates R -> infinity
// (Richardson in 1/R on the last two ladder points), inverse-transforms,
// and divides by the stationary density.
StationaryCgoResult recover_F1_stationary_cgo(
    const PairingOracle& oracle, const StationarySolution& background,
    const std::vector<std::array<int, 3>>& modes,
    const std::vector<double>& R_ladder);

}  // namespace mfglab
