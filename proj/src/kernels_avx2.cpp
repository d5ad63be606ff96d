#include "mfglab/kernels.hpp"

#ifdef MFGLAB_HAVE_AVX2
#include <immintrin.h>

namespace mfglab::kernels {

namespace {

// [a0r a0i a1r a1i] * [b0r b0i b1r b1i] componentwise complex multiply.
// Per element: re = ar*br - ai*bi, im = ar*bi + ai*br — exactly the scalar
// formula, so rounding matches the reference kernels bit for bit (no FMA).
inline __m256d cmul(__m256d a, __m256d b) {
  __m256d ar = _mm256_shuffle_pd(a, a, 0x0);
  __m256d ai = _mm256_shuffle_pd(a, a, 0xF);
  __m256d bs = _mm256_shuffle_pd(b, b, 0x5);
  return _mm256_addsub_pd(_mm256_mul_pd(ar, b), _mm256_mul_pd(ai, bs));
}

void axpy_avx2(cplx a, const cplx* x, cplx* y, std::size_t n) {
  const __m256d va = _mm256_setr_pd(a.real(), a.imag(), a.real(), a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d vx = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    __m256d vy = _mm256_loadu_pd(reinterpret_cast<double*>(y + i));
    _mm256_storeu_pd(reinterpret_cast<double*>(y + i),
                     _mm256_add_pd(vy, cmul(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpby_avx2(cplx a, const cplx* x, cplx b, const cplx* y, cplx* z,
                std::size_t n) {
  const __m256d va = _mm256_setr_pd(a.real(), a.imag(), a.real(), a.imag());
  const __m256d vb = _mm256_setr_pd(b.real(), b.imag(), b.real(), b.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d vx = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    __m256d vy = _mm256_loadu_pd(reinterpret_cast<const double*>(y + i));
    _mm256_storeu_pd(reinterpret_cast<double*>(z + i),
                     _mm256_add_pd(cmul(va, vx), cmul(vb, vy)));
  }
  for (; i < n; ++i) z[i] = a * x[i] + b * y[i];
}

void hadamard_avx2(const cplx* x, const cplx* y, cplx* z, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d vx = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    __m256d vy = _mm256_loadu_pd(reinterpret_cast<const double*>(y + i));
    _mm256_storeu_pd(reinterpret_cast<double*>(z + i), cmul(vx, vy));
  }
  for (; i < n; ++i) {
    double re = x[i].real() * y[i].real() - x[i].imag() * y[i].imag();
    double im = x[i].real() * y[i].imag() + x[i].imag() * y[i].real();
    z[i] = {re, im};
  }
}

void scale_avx2(cplx a, const cplx* x, cplx* y, std::size_t n) {
  const __m256d va = _mm256_setr_pd(a.real(), a.imag(), a.real(), a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d vx = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    _mm256_storeu_pd(reinterpret_cast<double*>(y + i), cmul(va, vx));
  }
  for (; i < n; ++i) {
    double re = a.real() * x[i].real() - a.imag() * x[i].imag();
    double im = a.real() * x[i].imag() + a.imag() * x[i].real();
    y[i] = {re, im};
  }
}

cplx dot_avx2(const cplx* x, const cplx* y, std::size_t n) {
  // Accumulate 4 complex partial sums in two registers, matching the 4-lane
  // pattern of the scalar reference.
  __m256d acc0 = _mm256_setzero_pd();  // lanes 0,1
  __m256d acc1 = _mm256_setzero_pd();  // lanes 2,3
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x0 = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    __m256d y0 = _mm256_loadu_pd(reinterpret_cast<const double*>(y + i));
    __m256d x1 = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i + 2));
    __m256d y1 = _mm256_loadu_pd(reinterpret_cast<const double*>(y + i + 2));
    acc0 = _mm256_add_pd(acc0, cmul(x0, y0));
    acc1 = _mm256_add_pd(acc1, cmul(x1, y1));
  }
  alignas(32) double a0[4], a1[4];
  _mm256_store_pd(a0, acc0);
  _mm256_store_pd(a1, acc1);
  double re[4] = {a0[0], a0[2], a1[0], a1[2]};
  double im[4] = {a0[1], a0[3], a1[1], a1[3]};
  for (; i < n; ++i) {
    re[0] += x[i].real() * y[i].real() - x[i].imag() * y[i].imag();
    im[0] += x[i].real() * y[i].imag() + x[i].imag() * y[i].real();
  }
  return {((re[0] + re[1]) + (re[2] + re[3])),
          ((im[0] + im[1]) + (im[2] + im[3]))};
}

double norm2_avx2(const cplx* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x0 = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i));
    __m256d x1 = _mm256_loadu_pd(reinterpret_cast<const double*>(x + i + 2));
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(x0, x0));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(x1, x1));
  }
  alignas(32) double a0[4], a1[4];
  _mm256_store_pd(a0, acc0);
  _mm256_store_pd(a1, acc1);
  // lane l of the scalar reference holds re^2+im^2 of element i+l
  double s[4] = {a0[0] + a0[1], a0[2] + a0[3], a1[0] + a1[1], a1[2] + a1[3]};
  for (; i < n; ++i)
    s[0] += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return (s[0] + s[1]) + (s[2] + s[3]);
}

}  // namespace

const KernelTable avx2_table = {axpy_avx2,  axpby_avx2, hadamard_avx2,
                                scale_avx2, dot_avx2,   norm2_avx2,
                                "avx2"};

bool avx2_available() { return __builtin_cpu_supports("avx2"); }

}  // namespace mfglab::kernels

#else

namespace mfglab::kernels {
const KernelTable avx2_table = {nullptr, nullptr, nullptr, nullptr,
                                nullptr, nullptr, "avx2-unavailable"};
bool avx2_available() { return false; }
}  // namespace mfglab::kernels

#endif
