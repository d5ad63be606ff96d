#pragma once
#include <array>
#include <cassert>
#include <complex>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "mfglab/kernels.hpp"

namespace mfglab {

using cplx = std::complex<double>;

enum class GridKind { PeriodicTorus, NeumannBox };

// Uniform tensor grid, dimension 1..3 (3 only for static CGO work).
// Node layout is x-fastest: idx = i + n0*(j + n1*k).
struct SpatialGrid {
  GridKind kind = GridKind::PeriodicTorus;
  int dim = 1;
  std::array<int, 3> n{8, 1, 1};
  std::array<double, 3> side{1.0, 1.0, 1.0};

  static SpatialGrid torus(int dim, int nodes, double side = 1.0);
  static SpatialGrid box(int dim, int nodes, double side = 1.0);

  long size() const {
    return static_cast<long>(n[0]) * n[1] * n[2];
  }
  double h(int axis) const {
    return kind == GridKind::PeriodicTorus ? side[axis] / n[axis]
                                           : side[axis] / (n[axis] - 1);
  }
  long index(int i, int j = 0, int k = 0) const {
    return i + static_cast<long>(n[0]) * (j + static_cast<long>(n[1]) * k);
  }
  void unindex(long idx, int& i, int& j, int& k) const {
    i = static_cast<int>(idx % n[0]);
    j = static_cast<int>((idx / n[0]) % n[1]);
    k = static_cast<int>(idx / (static_cast<long>(n[0]) * n[1]));
  }
  double coord(int axis, int i) const { return i * h(axis); }
  // Tensor quadrature weight: rectangle (torus) / trapezoid (box).
  double quad_weight(long idx) const;
  bool is_boundary(long idx) const;  // outer boundary, box grids only
  bool operator==(const SpatialGrid&) const = default;
};

struct TimeGrid {
  double T = 1.0;
  int steps = 1;
  double tau() const { return T / steps; }
  double t(int nstep) const { return nstep * tau(); }
  bool operator==(const TimeGrid&) const = default;
};

// Space-only complex field.
struct Field {
  SpatialGrid grid;
  std::vector<cplx> v;

  Field() = default;
  explicit Field(const SpatialGrid& g, cplx fill = 0.0)
      : grid(g), v(g.size(), fill) {}

  long size() const { return static_cast<long>(v.size()); }
  cplx& operator[](long i) { return v[i]; }
  const cplx& operator[](long i) const { return v[i]; }

  Field& operator+=(const Field& o) {
    kernels::active().axpy_c(1.0, o.v.data(), v.data(), v.size());
    return *this;
  }
  Field& operator-=(const Field& o) {
    kernels::active().axpy_c(-1.0, o.v.data(), v.data(), v.size());
    return *this;
  }
  Field& operator*=(cplx a) {
    kernels::active().scale_c(a, v.data(), v.data(), v.size());
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(cplx a, Field f) { return f *= a; }
  // pointwise product
  friend Field hadamard(const Field& a, const Field& b) {
    Field r(a.grid);
    kernels::active().hadamard_c(a.v.data(), b.v.data(), r.v.data(),
                                 r.v.size());
    return r;
  }
  double max_abs() const;
  double l2() const;  // sqrt of quadrature-weighted integral of |f|^2
};

// Space-time field sampled at the (steps+1) time nodes, time-major storage.
struct SpaceTimeField {
  SpatialGrid grid;
  TimeGrid time;
  std::vector<cplx> v;

  SpaceTimeField() = default;
  SpaceTimeField(const SpatialGrid& g, const TimeGrid& tg, cplx fill = 0.0)
      : grid(g), time(tg), v(static_cast<size_t>(tg.steps + 1) * g.size(), fill) {}

  cplx& at(int nstep, long idx) { return v[static_cast<size_t>(nstep) * grid.size() + idx]; }
  const cplx& at(int nstep, long idx) const {
    return v[static_cast<size_t>(nstep) * grid.size() + idx];
  }
  Field slice(int nstep) const;
  void set_slice(int nstep, const Field& f);
  double max_abs() const;
  double l2() const;  // space-time L2 (trapezoid in t)
  SpaceTimeField& operator+=(const SpaceTimeField& o) {
    kernels::active().axpy_c(1.0, o.v.data(), v.data(), v.size());
    return *this;
  }
  SpaceTimeField& operator-=(const SpaceTimeField& o) {
    kernels::active().axpy_c(-1.0, o.v.data(), v.data(), v.size());
    return *this;
  }
  SpaceTimeField& operator*=(cplx a) {
    kernels::active().scale_c(a, v.data(), v.data(), v.size());
    return *this;
  }
  friend SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) {
    return a -= b;
  }
  friend SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) {
    return a += b;
  }
  // time reversal: slice n <-> steps-n
  SpaceTimeField time_reversed() const;
};

// Evaluate a callable f(x0[,x1[,x2]]) on every node.
template <typename F>
Field sample(const SpatialGrid& g, F&& f) {
  Field out(g);
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    if constexpr (std::is_invocable_v<F, double, double, double>)
      out[idx] = f(g.coord(0, i), g.coord(1, j), g.coord(2, k));
    else if constexpr (std::is_invocable_v<F, double, double>)
      out[idx] = f(g.coord(0, i), g.coord(1, j));
    else
      out[idx] = f(g.coord(0, i));
  }
  return out;
}

template <typename F>
SpaceTimeField sample_spacetime(const SpatialGrid& g, const TimeGrid& tg, F&& f) {
  SpaceTimeField out(g, tg);
  for (int n = 0; n <= tg.steps; ++n) {
    double t = tg.t(n);
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, k;
      g.unindex(idx, i, j, k);
      if constexpr (std::is_invocable_v<F, double, double, double, double>)
        out.at(n, idx) = f(g.coord(0, i), g.coord(1, j), g.coord(2, k), t);
      else if constexpr (std::is_invocable_v<F, double, double, double>)
        out.at(n, idx) = f(g.coord(0, i), g.coord(1, j), t);
      else
        out.at(n, idx) = f(g.coord(0, i), t);
    }
  }
  return out;
}

}  // namespace mfglab
