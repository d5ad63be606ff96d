#pragma once
// Carleman weight families, weighted space-time energies, bounded-ratio
// verification of the weighted inequalities, and the stability experiments
// (interior forward estimate, Lipschitz source recovery, Hoelder
// terminal-data continuity).
#include <cstdint>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"

namespace mfglab {

// purely temporal weight phi_{lambda,k}(t) = exp(lambda (t + b)^k)
struct TimeWeight {
  double lambda = 1.0;
  double k = 3.0;
  double b = 1.0;
  double operator()(double t) const;
};

// Space-time weight pair on a box:
//   phi(x,t)   = e^{lambda eta(x)} / mu(t),
//   alpha(x,t) = (e^{lambda eta(x)} - e^{2 lambda max eta}) / mu(t) < 0,
// with eta > 0 inside, |grad eta| > 0, eta = 0 on the unobserved face,
// and the symmetric bump mu(t) = t^2 (T - t)^2 (T/2)^{-2}.
struct SpaceTimeWeight {
  Field eta;
  double eta_max = 0.0;
  double lambda = 1.0;
  double T = 1.0;
  int unobserved_axis = 0;  // face x_axis = L carries eta = 0

  double mu(double t) const;
  double phi(long idx, double t) const;
  double alpha(long idx, double t) const;
  double log_phi(long idx, double t) const;  // for log-space quadrature
};

// admissible affine profile eta(x) = 1 - x_0/L_0 on a box grid
SpaceTimeWeight make_box_weight(const SpatialGrid& g, double T,
                                double lambda);

// sup over the grid and open time interval of phi^rho e^{2 s alpha}
double sup_weighted(const SpaceTimeWeight& w, const TimeGrid& tg, double s,
                    double rho);

// moving-front weight e^{lambda (d(x) - beta (t - t0)^2)}
struct UcpWeight {
  Field d;
  double beta = 1.0;
  double lambda = 1.0;
  double t0 = 0.0;
  double operator()(long idx, double t) const;
};

// Weighted-energy ratio for one trial u on a Neumann box: the interior
// Carleman energy of u against the equation residual F := d_t u - Lap u
// plus the observed-boundary energy, all under e^{2 s alpha}, evaluated
// with log-sum-exp quadrature so large s never under/overflows.
// Returns the natural log of LHS/RHS (-inf for the zero trial).
double parabolic_carleman_log_ratio(const SpaceTimeField& u,
                                    const SpaceTimeWeight& w, double s);

// Same protocol for the coupled pair: residuals
//   F := d_t u + Lap u + a0 u - c0 m,   G := d_t m - Lap m - Lap u,
// second-order u energy and first-order m energy on the left, weighted
// residual norms plus unweighted observed-boundary H1 traces on the right.
double mfg_carleman_log_ratio(const SpaceTimeField& u, const SpaceTimeField& m,
                              const SpaceTimeWeight& w, double s, double c0,
                              double a0 = 0.0);

struct RatioReport {
  std::vector<double> s_ladder;
  std::vector<double> max_log_ratio;  // per rung, max over trials
  double log_slope = 0.0;  // least-squares d log(ratio) / d log(s)
  bool bounded = false;    // log_slope <= 0.1
};

// Random band-limited Neumann trials (tensor cosines in x, low cosines in
// t), seeded; reports the per-rung max ratio and its trend across the s
// ladder. Trials are independent and reduced in seed order.
RatioReport verify_parabolic_carleman(const SpatialGrid& g,
                                      const TimeGrid& tg, int trials,
                                      const std::vector<double>& s_ladder,
                                      const SpaceTimeWeight& w,
                                      std::uint64_t seed);

RatioReport verify_mfg_carleman(const SpatialGrid& g, const TimeGrid& tg,
                                int trials,
                                const std::vector<double>& s_ladder,
                                const SpaceTimeWeight& w, std::uint64_t seed,
                                double c0 = 1.0, double a0 = 0.0);

// One monolithic space-time sparse solve of the linear forward-backward
// pair on a Neumann box (real data):
//   d_t u + Lap u = c0 m + F,   d_t m - Lap m = Lap u + G   in Q,
//   d_nu u = d_nu m = 0,        u(., T) = uT,  m(., 0) = m0.
struct CoupledSolution {
  SpaceTimeField u, m;
};
CoupledSolution solve_coupled_linear(const SpatialGrid& g, const TimeGrid& tg,
                                     double c0, const SpaceTimeField& F,
                                     const SpaceTimeField& G, const Field& uT,
                                     const Field& m0);

struct StabilityReport {
  std::vector<double> ratios;  // per trial
  double max_ratio = 0.0;
};

// Sources F = q1(x,t) f1(x), G = q2(x,t) f2(x) with fixed profiles q_j
// bounded away from zero at t0; random band-limited (f1, f2).
// ratio = (||f1|| + ||f2||) / (H2 snapshots at t0 + lateral H1 traces).
StabilityReport lipschitz_source_experiment(const SpatialGrid& g,
                                            const TimeGrid& tg, double t0,
                                            int trials, std::uint64_t seed,
                                            double c0 = 1.0);

// Interior H^{2,1}(Omega x (eps, T-eps)) energy of (u, m) against the data
// norms ||F|| + ||G|| + lateral H1 traces, over random trials.
StabilityReport forward_stability_experiment(const SpatialGrid& g,
                                             const TimeGrid& tg, double eps,
                                             int trials, std::uint64_t seed,
                                             double c0 = 1.0);

struct HolderReport {
  std::vector<double> delta;            // terminal perturbation sizes
  std::vector<double> diff;             // H^{1,0}(Q_{eps,T}) differences
  std::vector<double> lambda_schedule;  // ln(delta)/(3(T+1)), clamped up
  bool lambda_clamped = false;
  double rho_hat = 0.0;     // fitted log-log slope of diff vs delta
  double rho_theory = 0.0;  // from 2 rho = (1/3) ((eps+1)/(T+1))^k
};

// Perturbs the terminal cost of the base problem by delta cos(2 pi x) over
// the ladder, solves both systems, and fits the decay of the combined
// H^{1,0} difference norm. The estimate is an upper bound, so the observed
// slope must be at least rho_theory.
HolderReport holder_stability_experiment(const MFGProblem& base, double eps,
                                         int k,
                                         const std::vector<double>& deltas,
                                         const MFGOpts& opts = {});

}  // namespace mfglab
