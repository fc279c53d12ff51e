#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "calreach/conformal.hpp"
#include "calreach/core.hpp"

namespace calreach {

struct GridDim {
  double lo = 0.0;
  double hi = 1.0;
  int n = 3;
};

// 4D grid over (x, y, v, theta). theta is periodic: nodes at lo + l*span/n
// for l = 0..n-1, the hi node being identified with lo. Other dimensions
// place nodes at lo + i*(hi-lo)/(n-1) inclusive of both ends.
struct Grid4 {
  GridDim x, y, v, th;

  double dx() const { return (x.hi - x.lo) / (x.n - 1); }
  double dy() const { return (y.hi - y.lo) / (y.n - 1); }
  double dv() const { return (v.hi - v.lo) / (v.n - 1); }
  double dth() const { return (th.hi - th.lo) / th.n; }

  std::size_t size() const {
    return static_cast<std::size_t>(x.n) * y.n * v.n * th.n;
  }
  std::size_t index(int ix, int iy, int iv, int ith) const {
    return ((static_cast<std::size_t>(ix) * y.n + iy) * v.n + iv) * th.n + ith;
  }
  double xc(int i) const { return x.lo + dx() * i; }
  double yc(int i) const { return y.lo + dy() * i; }
  double vc(int i) const { return v.lo + dv() * i; }
  double thc(int i) const { return th.lo + dth() * i; }
};

// Throws std::invalid_argument unless every dimension has >= 3 nodes,
// hi > lo, and the theta span is 2*pi.
void validate_grid(const Grid4& g);

// 40 m x 40 m x [-2, 20] m/s x (-pi, pi] window centered on (cx, cy),
// 41 x 41 x 11 x 25 nodes.
Grid4 default_grid(double cx, double cy);

// Value function V over a Grid4; the represented set is {V <= 0}.
struct ValueGrid {
  Grid4 grid;
  std::vector<double> values;
};

// 2D occupancy mask over the (x, y) sub-grid. mask is row-major ix*ny + iy;
// (x0, y0) is the center of cell (0, 0).
struct SpatialSet {
  int nx = 0, ny = 0;
  double x0 = 0.0, y0 = 0.0;
  double dx = 1.0, dy = 1.0;
  std::vector<std::uint8_t> mask;
};

// Closed-form optimal-control Hamiltonian:
// H = p1 v cos(th) + p2 v sin(th) + min_{u1 in box} p3 u1 + min_{u2 in box} p4 u2,
// each min at the lower bound when the costate component is positive.
double hamiltonian(const AgentState& z, const std::array<double, 4>& p,
                   const ControlInterval& box);

// Signed distance (in cell-normalized units: each axis measured in cells,
// theta differences wrapped) to a ball of radius one cell diagonal around s0.
// s0 must lie inside the x/y/v bounds.
ValueGrid seed_grid(const Grid4& g, const AgentState& s0);

// Largest stable PDE substep: 0.8 / sum_j alpha_j / dz_j with the global
// bounds alpha = (|v|max, |v|max, |u1|max, |u2|max).
double cfl_max_dt(const Grid4& g, const ControlInterval& box);

// One substep of the forward-reachability PDE (ENO2 upwind, Heun time step)
// followed by the tube freeze V <- min(V_new, V_old). Rejects dt_pde beyond
// the CFL bound.
ValueGrid frt_step(const ValueGrid& V, const ControlInterval& box,
                   double dt_pde);

// Seeds at s0, then for each of the h interval steps propagates over one dt
// (split into CFL-stable substeps) with that step's control box, freezing
// throughout, and projects to a SpatialSet after each dt.
std::vector<SpatialSet> generate_tubes(const AgentState& s0,
                                       const ControlIntervalSequence& intervals,
                                       const Grid4& grid, double dt);

// mask(x, y) = 1 iff min over (v, theta) of V <= 0.
SpatialSet project_xy(const ValueGrid& V);

double set_area(const SpatialSet& s);

// Nearest-cell membership test; points outside the grid are not in the set.
bool point_in_set(const SpatialSet& s, double px, double py);

// Multilinear interpolation of V at z; x/y/v clamped to the grid, theta
// wrapped periodically.
double value_at(const ValueGrid& V, const AgentState& z);

// Interpolated central-difference gradient of V at z (same boundary rules).
std::array<double, 4> gradient_at(const ValueGrid& V, const AgentState& z);

namespace detail {

// Growth-oriented Hamiltonian max_u <p, f(z, u)>; equals -hamiltonian(z, -p, box).
double growth_hamiltonian(const AgentState& z, const std::array<double, 4>& p,
                          const ControlInterval& box);

// One Euler stage of the growth PDE: out = in - dt * H_upwind(in) with ENO2
// one-sided reconstructions and per-axis Godunov upwind flux. No CFL check.
// With heun_base non-null the stage instead completes a frozen Heun step,
// out = min(heun_base, 0.5 * (heun_base + in - dt * H_upwind(in))); out must
// then be distinct from both in and heun_base.
void growth_sweep(const Grid4& g, const std::vector<double>& in,
                  const ControlInterval& box, double dt,
                  std::vector<double>& out, const double* heun_base = nullptr);

// One growth substep: ENO2 reconstructions, per-axis Godunov upwind flux,
// Heun time step, then the tube freeze out = min(rk2, in). No CFL check.
// in, out and scratch must be distinct buffers of grid size.
void tube_substep(const Grid4& g, const std::vector<double>& in,
                  const ControlInterval& box, double dt,
                  std::vector<double>& out, std::vector<double>& scratch);

}  // namespace detail

}  // namespace calreach
