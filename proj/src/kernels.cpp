#include "mfglab/kernels.hpp"

namespace mfglab::kernels {

namespace {

inline cplx cmul1(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

void axpy_scalar(cplx a, const cplx* x, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    cplx p = cmul1(a, x[i]);
    y[i] = {y[i].real() + p.real(), y[i].imag() + p.imag()};
  }
}

void axpby_scalar(cplx a, const cplx* x, cplx b, const cplx* y, cplx* z,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    cplx p = cmul1(a, x[i]), q = cmul1(b, y[i]);
    z[i] = {p.real() + q.real(), p.imag() + q.imag()};
  }
}

void hadamard_scalar(const cplx* x, const cplx* y, cplx* z, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    // explicit complex multiply; same formula as the vector variant
    double re = x[i].real() * y[i].real() - x[i].imag() * y[i].imag();
    double im = x[i].real() * y[i].imag() + x[i].imag() * y[i].real();
    z[i] = {re, im};
  }
}

void scale_scalar(cplx a, const cplx* x, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double re = a.real() * x[i].real() - a.imag() * x[i].imag();
    double im = a.real() * x[i].imag() + a.imag() * x[i].real();
    y[i] = {re, im};
  }
}

cplx dot_scalar(const cplx* x, const cplx* y, std::size_t n) {
  // 4 independent partial sums; the AVX2 version accumulates in the same
  // lane pattern so both produce identical rounding.
  double re[4] = {0, 0, 0, 0}, im[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) {
      const cplx &a = x[i + l], &b = y[i + l];
      re[l] += a.real() * b.real() - a.imag() * b.imag();
      im[l] += a.real() * b.imag() + a.imag() * b.real();
    }
  }
  for (; i < n; ++i) {
    re[0] += x[i].real() * y[i].real() - x[i].imag() * y[i].imag();
    im[0] += x[i].real() * y[i].imag() + x[i].imag() * y[i].real();
  }
  return {((re[0] + re[1]) + (re[2] + re[3])),
          ((im[0] + im[1]) + (im[2] + im[3]))};
}

double norm2_scalar(const cplx* x, std::size_t n) {
  // separate re/im accumulators per lane, mirrored by the AVX2 variant
  double sr[4] = {0, 0, 0, 0}, si[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) {
      sr[l] += x[i + l].real() * x[i + l].real();
      si[l] += x[i + l].imag() * x[i + l].imag();
    }
  double s[4] = {sr[0] + si[0], sr[1] + si[1], sr[2] + si[2], sr[3] + si[3]};
  for (; i < n; ++i)
    s[0] += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return (s[0] + s[1]) + (s[2] + s[3]);
}

const KernelTable* forced = nullptr;

}  // namespace

const KernelTable scalar_table = {axpy_scalar,  axpby_scalar, hadamard_scalar,
                                  scale_scalar, dot_scalar,   norm2_scalar,
                                  "scalar"};

const KernelTable& active() {
  if (forced) return *forced;
  static const KernelTable* chosen =
      avx2_available() ? &avx2_table : &scalar_table;
  return *chosen;
}

void force(const KernelTable* t) { forced = t; }

}  // namespace mfglab::kernels
