#pragma once
// Differential/spectral operators and quadrature. Periodic grids use exact
// spectral differentiation (FFT); Neumann boxes use second-order centered
// differences with ghost reflection and conservative flux-form divergence.
#include <functional>

#include "mfglab/grid.hpp"

namespace mfglab {

// --- FFT plumbing (periodic grids) ---
// Unnormalized forward/backward DFT of the nodal values, FFTW sign
// conventions: forward multiplies by e^{-2*pi*i k.j/N}.
std::vector<cplx> dft(const SpatialGrid& g, const std::vector<cplx>& in, int sign);

// Signed mode along an axis for storage slot k.
inline int mode_of(int k, int n) { return (k <= n / 2) ? k : k - n; }

// Table of Fourier coefficients c_xi = Int f e^{-2 pi i xi.x} dx.
struct FourierTable {
  SpatialGrid grid;
  std::vector<cplx> c;  // DFT layout
  cplx coeff(int kx, int ky = 0, int kz = 0) const;  // signed modes, wrap
};

FourierTable fourier_coeffs(const Field& f);
Field inverse_fourier(const FourierTable& t);

// --- differential operators ---
Field laplacian(const Field& f);
std::vector<Field> gradient(const Field& f);
Field divergence(const std::vector<Field>& vfield);

// One-sided O(h^2) outward normal derivative at a boundary node (box grids).
cplx normal_derivative(const Field& f, long idx);

// --- quadrature ---
cplx integrate(const Field& f);
// bilinear (unconjugated) quadrature pairing Int f g dx
cplx pair(const Field& f, const Field& g);
// space-time pairing with trapezoid in t
cplx pair_spacetime(const SpaceTimeField& f, const SpaceTimeField& g);

// --- Wasserstein-1 in one dimension via CDF integral ---
double wasserstein1_1d(const Field& m1, const Field& m2, double mass_tol = 1e-8);

}  // namespace mfglab
