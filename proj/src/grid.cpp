#include "mfglab/grid.hpp"

#include <cmath>

namespace mfglab {

SpatialGrid SpatialGrid::torus(int dim, int nodes, double side) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("torus: dim must be 1..3");
  if (nodes < 8) throw std::invalid_argument("torus: need >= 8 nodes per axis");
  SpatialGrid g;
  g.kind = GridKind::PeriodicTorus;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    g.n[a] = nodes;
    g.side[a] = side;
  }
  for (int a = dim; a < 3; ++a) {
    g.n[a] = 1;
    g.side[a] = 1.0;
  }
  return g;
}

SpatialGrid SpatialGrid::box(int dim, int nodes, double side) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("box: dim must be 1..2");
  if (nodes < 8) throw std::invalid_argument("box: need >= 8 nodes per axis");
  SpatialGrid g;
  g.kind = GridKind::NeumannBox;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    g.n[a] = nodes;
    g.side[a] = side;
  }
  for (int a = dim; a < 3; ++a) {
    g.n[a] = 1;
    g.side[a] = 1.0;
  }
  return g;
}

double SpatialGrid::quad_weight(long idx) const {
  if (kind == GridKind::PeriodicTorus) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) w *= h(a);
    return w;
  }
  int ijk[3];
  unindex(idx, ijk[0], ijk[1], ijk[2]);
  double w = 1.0;
  for (int a = 0; a < dim; ++a) {
    bool edge = (ijk[a] == 0 || ijk[a] == n[a] - 1);
    w *= h(a) * (edge ? 0.5 : 1.0);
  }
  return w;
}

bool SpatialGrid::is_boundary(long idx) const {
  if (kind != GridKind::NeumannBox) return false;
  int ijk[3];
  unindex(idx, ijk[0], ijk[1], ijk[2]);
  for (int a = 0; a < dim; ++a)
    if (ijk[a] == 0 || ijk[a] == n[a] - 1) return true;
  return false;
}

double Field::max_abs() const {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

double Field::l2() const {
  double s = 0.0;
  for (long i = 0; i < size(); ++i) s += grid.quad_weight(i) * std::norm(v[i]);
  return std::sqrt(s);
}

Field SpaceTimeField::slice(int nstep) const {
  Field f(grid);
  const cplx* src = v.data() + static_cast<size_t>(nstep) * grid.size();
  std::copy(src, src + grid.size(), f.v.begin());
  return f;
}

void SpaceTimeField::set_slice(int nstep, const Field& f) {
  std::copy(f.v.begin(), f.v.end(),
            v.begin() + static_cast<size_t>(nstep) * grid.size());
}

double SpaceTimeField::max_abs() const {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

double SpaceTimeField::l2() const {
  double s = 0.0;
  double tau = time.tau();
  for (int nstep = 0; nstep <= time.steps; ++nstep) {
    double wt = (nstep == 0 || nstep == time.steps) ? 0.5 * tau : tau;
    double sp = 0.0;
    for (long i = 0; i < grid.size(); ++i)
      sp += grid.quad_weight(i) * std::norm(at(nstep, i));
    s += wt * sp;
  }
  return std::sqrt(s);
}

SpaceTimeField SpaceTimeField::time_reversed() const {
  SpaceTimeField r(grid, time);
  for (int nstep = 0; nstep <= time.steps; ++nstep) {
    const cplx* src = v.data() + static_cast<size_t>(nstep) * grid.size();
    cplx* dst = r.v.data() + static_cast<size_t>(time.steps - nstep) * grid.size();
    std::copy(src, src + grid.size(), dst);
  }
  return r;
}

}  // namespace mfglab
