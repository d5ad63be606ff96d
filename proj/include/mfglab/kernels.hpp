#pragma once
// Pointwise array kernels used by Field arithmetic. Each kernel has a scalar
// reference implementation and (on x86-64) an AVX2 variant compiled in a
// separate TU; the active set is chosen once at startup by CPU detection.
// Both variants use the same operation order so results are bit-identical.
#include <complex>
#include <cstddef>

namespace mfglab::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  // y[i] += a * x[i]
  void (*axpy_c)(cplx a, const cplx* x, cplx* y, std::size_t n);
  // z[i] = a*x[i] + b*y[i]
  void (*axpby_c)(cplx a, const cplx* x, cplx b, const cplx* y, cplx* z,
                  std::size_t n);
  // z[i] = x[i] * y[i]
  void (*hadamard_c)(const cplx* x, const cplx* y, cplx* z, std::size_t n);
  // y[i] = a * x[i]
  void (*scale_c)(cplx a, const cplx* x, cplx* y, std::size_t n);
  // sum of x[i] * y[i] (bilinear, no conjugation)
  cplx (*dot_bilinear)(const cplx* x, const cplx* y, std::size_t n);
  // sum of |x[i]|^2
  double (*norm2_sq)(const cplx* x, std::size_t n);
  const char* name;
};

// Scalar reference kernels (always available).
extern const KernelTable scalar_table;
// AVX2 kernels; null entries when not compiled in.
extern const KernelTable avx2_table;
bool avx2_available();

// Active table: avx2 when the CPU supports it, else scalar.
const KernelTable& active();
// Force a table (used by the equivalence tests); pass nullptr to reset to
// auto-detection.
void force(const KernelTable* t);

}  // namespace mfglab::kernels
