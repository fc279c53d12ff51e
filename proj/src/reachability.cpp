#include "calreach/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calreach {

namespace {

void check_box(const ControlInterval& box) {
  if (!(box.lo.u1 <= box.hi.u1) || !(box.lo.u2 <= box.hi.u2) ||
      !std::isfinite(box.lo.u1) || !std::isfinite(box.hi.u1) ||
      !std::isfinite(box.lo.u2) || !std::isfinite(box.hi.u2)) {
    throw std::invalid_argument("control box must be finite with lo <= hi");
  }
}

// Central difference at a node; one-sided at non-periodic edges, periodic in
// theta. Matches the boundary treatment of the PDE kernel.
std::array<double, 4> node_gradient(const ValueGrid& V, int ix, int iy, int iv,
                                    int ith) {
  const Grid4& g = V.grid;
  const auto& f = V.values;
  const std::size_t sx = static_cast<std::size_t>(g.y.n) * g.v.n * g.th.n;
  const std::size_t sy = static_cast<std::size_t>(g.v.n) * g.th.n;
  const std::size_t sv = g.th.n;
  const std::size_t i = g.index(ix, iy, iv, ith);

  auto axis = [&](int idx, int n, std::size_t stride, double spacing) {
    double lo, hi;
    int span = 2;
    if (idx == 0) {
      lo = f[i];
      hi = f[i + stride];
      span = 1;
    } else if (idx == n - 1) {
      lo = f[i - stride];
      hi = f[i];
      span = 1;
    } else {
      lo = f[i - stride];
      hi = f[i + stride];
    }
    return (hi - lo) / (span * spacing);
  };

  const std::size_t ithm = ith == 0 ? i + (g.th.n - 1) : i - 1;
  const std::size_t ithp = ith == g.th.n - 1 ? i - (g.th.n - 1) : i + 1;
  return {axis(ix, g.x.n, sx, g.dx()), axis(iy, g.y.n, sy, g.dy()),
          axis(iv, g.v.n, sv, g.dv()),
          (f[ithp] - f[ithm]) / (2.0 * g.dth())};
}

struct CellPos {
  int i0, i1;
  double w;  // weight of i1
};

CellPos locate_clamped(double coord, double lo, double spacing, int n) {
  double t = (coord - lo) / spacing;
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  int i0 = static_cast<int>(t);
  i0 = std::min(i0, n - 2);
  return {i0, i0 + 1, t - i0};
}

CellPos locate_periodic(double theta, double lo, double spacing, int n) {
  double t = (theta - lo) / spacing;
  t -= std::floor(t / n) * n;  // into [0, n)
  int i0 = static_cast<int>(t);
  if (i0 >= n) i0 = n - 1;
  return {i0, (i0 + 1) % n, t - i0};
}

template <class NodeFn>
double interp16(const ValueGrid& V, const AgentState& z, NodeFn node_value) {
  const Grid4& g = V.grid;
  const CellPos cx = locate_clamped(z.x, g.x.lo, g.dx(), g.x.n);
  const CellPos cy = locate_clamped(z.y, g.y.lo, g.dy(), g.y.n);
  const CellPos cv = locate_clamped(z.v, g.v.lo, g.dv(), g.v.n);
  const CellPos ct = locate_periodic(z.theta, g.th.lo, g.dth(), g.th.n);
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        for (int d = 0; d < 2; ++d) {
          const double w = (a ? cx.w : 1 - cx.w) * (b ? cy.w : 1 - cy.w) *
                           (c ? cv.w : 1 - cv.w) * (d ? ct.w : 1 - ct.w);
          if (w > 0.0) {
            acc += w * node_value(a ? cx.i1 : cx.i0, b ? cy.i1 : cy.i0,
                                  c ? cv.i1 : cv.i0, d ? ct.i1 : ct.i0);
          }
        }
      }
    }
  }
  return acc;
}

}  // namespace

void validate_grid(const Grid4& g) {
  for (const GridDim* d : {&g.x, &g.y, &g.v, &g.th}) {
    if (d->n < 3) {
      throw std::invalid_argument("grid needs at least 3 nodes per dimension");
    }
    if (!(d->hi > d->lo)) {
      throw std::invalid_argument("grid bounds must satisfy hi > lo");
    }
  }
  if (std::fabs((g.th.hi - g.th.lo) - kTwoPi) > 1e-9) {
    throw std::invalid_argument("theta dimension must span exactly 2*pi");
  }
}

Grid4 default_grid(double cx, double cy) {
  Grid4 g;
  g.x = {cx - 20.0, cx + 20.0, 41};
  g.y = {cy - 20.0, cy + 20.0, 41};
  g.v = {-2.0, 20.0, 11};
  g.th = {-kPi, kPi, 25};
  return g;
}

double hamiltonian(const AgentState& z, const std::array<double, 4>& p,
                   const ControlInterval& box) {
  return p[0] * z.v * std::cos(z.theta) + p[1] * z.v * std::sin(z.theta) +
         std::min(p[2] * box.lo.u1, p[2] * box.hi.u1) +
         std::min(p[3] * box.lo.u2, p[3] * box.hi.u2);
}

namespace detail {

double growth_hamiltonian(const AgentState& z, const std::array<double, 4>& p,
                          const ControlInterval& box) {
  return p[0] * z.v * std::cos(z.theta) + p[1] * z.v * std::sin(z.theta) +
         std::max(p[2] * box.lo.u1, p[2] * box.hi.u1) +
         std::max(p[3] * box.lo.u2, p[3] * box.hi.u2);
}

inline double minmod(double a, double b) {
  return a * b <= 0.0 ? 0.0 : (std::fabs(a) < std::fabs(b) ? a : b);
}

// per-sweep constants of the lane kernel; the *_l/*_r pairs are 0/1 weights
// naming which one-sided gradient each box endpoint selects
struct SweepConsts {
  double dt, inv_dx, inv_dy, inv_dv, inv_dth;
  double u1lo, u1hi, u2lo, u2hi;
  double vl_l, vl_r, vh_l, vh_r, tl_l, tl_r, th_l, th_r;
};

// Euler update for one theta-column: tu = c - dt * H_upwind. Kept out of
// line so the arrays keep opaque bases; inlined into the sweep they all
// visibly share one arena and the vectorizer refuses the loop.
__attribute__((noinline)) void combine_column(
    int nth, double vv, const SweepConsts& k, const double* __restrict ctp,
    const double* __restrict stp, const double* __restrict xa,
    const double* __restrict xb, const double* __restrict xf,
    const double* __restrict xd, const double* __restrict ya,
    const double* __restrict yb, const double* __restrict yf,
    const double* __restrict yd, const double* __restrict va,
    const double* __restrict vb, const double* __restrict vf,
    const double* __restrict vd, const double* __restrict colp,
    double* __restrict tu) {
  const double* __restrict cm2 = colp;
  const double* __restrict cm1 = colp + 1;
  const double* __restrict cc = colp + 2;
  const double* __restrict cp1 = colp + 3;
  const double* __restrict cp2 = colp + 4;
  for (int l = 0; l < nth; ++l) {
    const double c = cc[l];

    // growth orientation: V_t + max_u <grad V, f> = 0; separable, so
    // per-axis Godunov upwinding is exact and adds no dissipation
    const double a1 = vv * ctp[l];
    const double a2 = vv * stp[l];
    const double xlo =
        (xb[l] + 0.5 * minmod(xb[l] - xa[l], xf[l] - xb[l])) * k.inv_dx;
    const double xhi =
        (xf[l] - 0.5 * minmod(xf[l] - xb[l], xd[l] - xf[l])) * k.inv_dx;
    const double hx = a1 * (a1 >= 0 ? xlo : xhi);
    const double ylo =
        (yb[l] + 0.5 * minmod(yb[l] - ya[l], yf[l] - yb[l])) * k.inv_dy;
    const double yhi =
        (yf[l] - 0.5 * minmod(yf[l] - yb[l], yd[l] - yf[l])) * k.inv_dy;
    const double hy = a2 * (a2 >= 0 ? ylo : yhi);

    const double vlo =
        (vb[l] + 0.5 * minmod(vb[l] - va[l], vf[l] - vb[l])) * k.inv_dv;
    const double vhi =
        (vf[l] - 0.5 * minmod(vf[l] - vb[l], vd[l] - vf[l])) * k.inv_dv;
    const double hv = std::max(k.u1lo * (k.vl_l * vlo + k.vl_r * vhi),
                               k.u1hi * (k.vh_l * vlo + k.vh_r * vhi));

    const double tb = c - cm1[l];
    const double tf = cp1[l] - c;
    const double ta = cm1[l] - cm2[l];
    const double td = cp2[l] - cp1[l];
    const double tlo = (tb + 0.5 * minmod(tb - ta, tf - tb)) * k.inv_dth;
    const double thi = (tf - 0.5 * minmod(tf - tb, td - tf)) * k.inv_dth;
    const double hth = std::max(k.u2lo * (k.tl_l * tlo + k.tl_r * thi),
                                k.u2hi * (k.th_l * tlo + k.th_r * thi));

    tu[l] = c - k.dt * (hx + hy + hv + hth);
  }
}

// out = in - dt * H_upwind(in), no freeze. Gradients are ENO2 one-sided
// reconstructions; a first-order stencil transports the seed's 2-cell feature
// so diffusively that the tube stalls within a couple of steps. When
// heun_base is non-null the sweep instead finishes a frozen Heun step:
// out = min(heun_base, 0.5 * (heun_base + in - dt * H_upwind(in))).
void growth_sweep(const Grid4& g, const std::vector<double>& in,
                  const ControlInterval& box, double dt,
                  std::vector<double>& out, const double* heun_base) {
  const int nx = g.x.n, ny = g.y.n, nv = g.v.n, nth = g.th.n;
  const double inv_dx = 1.0 / g.dx(), inv_dy = 1.0 / g.dy();
  const double inv_dv = 1.0 / g.dv(), inv_dth = 1.0 / g.dth();
  const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(ny) * nv * nth;
  const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(nv) * nth;
  const std::ptrdiff_t sv = nth;
  const double u1lo = box.lo.u1, u1hi = box.hi.u1;
  const double u2lo = box.lo.u2, u2hi = box.hi.u2;

  std::vector<double> ct(nth), st(nth);
  for (int i = 0; i < nth; ++i) {
    ct[i] = std::cos(g.thc(i));
    st[i] = std::sin(g.thc(i));
  }

  // Lane arena: per theta-column one-sided stencil differences for each axis
  // (outer-backward a, backward b, forward fw, outer-forward d), the Euler
  // update tu, and a wrap-padded copy of the column. Every stencil neighbor
  // of a theta-column is a contiguous run of nth values, so the hot loops
  // below are unit stride and branch free, which lets them vectorize.
  std::vector<double> arena(static_cast<std::size_t>(14 * nth) + 4);
  double* __restrict xa = arena.data();
  double* __restrict xb = xa + nth;
  double* __restrict xf = xb + nth;
  double* __restrict xd = xf + nth;
  double* __restrict ya = xd + nth;
  double* __restrict yb = ya + nth;
  double* __restrict yf = yb + nth;
  double* __restrict yd = yf + nth;
  double* __restrict va = yd + nth;
  double* __restrict vb = va + nth;
  double* __restrict vf = vb + nth;
  double* __restrict vd = vf + nth;
  double* __restrict tu = vd + nth;
  double* __restrict colp = tu + nth;

  // One-sided differences with the ENO2 edge rules applied as whole-array
  // fixups: a boundary node uses its only available difference on both sides,
  // and a missing outer-stencil term drops the correction to first order (the
  // minmod below vanishes against a zero difference). Clamped pointers keep
  // the raw fills in bounds; the fixups overwrite every affected lane.
  auto fill_axis = [nth](const double* f, std::ptrdiff_t s, int idx, int n,
                         double* __restrict a, double* __restrict b,
                         double* __restrict fw, double* __restrict d) {
    const double* m2 = f - (idx >= 2 ? 2 : idx) * s;
    const double* m1 = f - (idx >= 1 ? 1 : 0) * s;
    const double* p1 = f + (idx <= n - 2 ? 1 : 0) * s;
    const double* p2 = f + (idx <= n - 3 ? 2 : idx <= n - 2 ? 1 : 0) * s;
    for (int l = 0; l < nth; ++l) {
      a[l] = m1[l] - m2[l];
      b[l] = f[l] - m1[l];
      fw[l] = p1[l] - f[l];
      d[l] = p2[l] - p1[l];
    }
    if (idx == 0) {
      for (int l = 0; l < nth; ++l) b[l] = a[l] = fw[l];
    } else if (idx == 1) {
      for (int l = 0; l < nth; ++l) a[l] = b[l];
    }
    if (idx == n - 1) {
      for (int l = 0; l < nth; ++l) fw[l] = d[l] = b[l];
    } else if (idx == n - 2) {
      for (int l = 0; l < nth; ++l) d[l] = fw[l];
    }
  };

  const SweepConsts k{dt,
                      inv_dx,
                      inv_dy,
                      inv_dv,
                      inv_dth,
                      u1lo,
                      u1hi,
                      u2lo,
                      u2hi,
                      u1lo >= 0.0 ? 1.0 : 0.0,
                      u1lo >= 0.0 ? 0.0 : 1.0,
                      u1hi >= 0.0 ? 1.0 : 0.0,
                      u1hi >= 0.0 ? 0.0 : 1.0,
                      u2lo >= 0.0 ? 1.0 : 0.0,
                      u2lo >= 0.0 ? 0.0 : 1.0,
                      u2hi >= 0.0 ? 1.0 : 0.0,
                      u2hi >= 0.0 ? 0.0 : 1.0};

  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int iv = 0; iv < nv; ++iv) {
        const double vv = g.vc(iv);
        const std::size_t at =
            ((static_cast<std::size_t>(ix) * ny + iy) * nv + iv) * nth;
        const double* col = in.data() + at;

        fill_axis(col, sx, ix, nx, xa, xb, xf, xd);
        fill_axis(col, sy, iy, ny, ya, yb, yf, yd);
        fill_axis(col, sv, iv, nv, va, vb, vf, vd);

        // theta wraps, so pad the column instead of fixing up edges
        colp[0] = col[nth - 2];
        colp[1] = col[nth - 1];
        for (int l = 0; l < nth; ++l) colp[2 + l] = col[l];
        colp[nth + 2] = col[0];
        colp[nth + 3] = col[1];

        combine_column(nth, vv, k, ct.data(), st.data(), xa, xb, xf, xd, ya,
                       yb, yf, yd, va, vb, vf, vd, colp, tu);

        if (heun_base) {
          const double* __restrict hb = heun_base + at;
          double* __restrict o = out.data() + at;
          for (int l = 0; l < nth; ++l) {
            const double b0 = hb[l];
            const double rk2 = 0.5 * (b0 + tu[l]);
            o[l] = rk2 < b0 ? rk2 : b0;
          }
        } else {
          double* __restrict o = out.data() + at;
          for (int l = 0; l < nth; ++l) o[l] = tu[l];
        }
      }
    }
  }
}

void tube_substep(const Grid4& g, const std::vector<double>& in,
                  const ControlInterval& box, double dt,
                  std::vector<double>& out, std::vector<double>& scratch) {
  // Heun (TVD-RK2) step, frozen against the pre-step values
  growth_sweep(g, in, box, dt, scratch);
  growth_sweep(g, scratch, box, dt, out, in.data());
}

}  // namespace detail

ValueGrid seed_grid(const Grid4& g, const AgentState& s0) {
  validate_grid(g);
  if (s0.x < g.x.lo || s0.x > g.x.hi || s0.y < g.y.lo || s0.y > g.y.hi ||
      s0.v < g.v.lo || s0.v > g.v.hi) {
    throw std::invalid_argument("seed state lies outside the grid bounds");
  }
  // one cell diagonal, in cell-normalized units
  const double r0 = 2.0;
  ValueGrid V;
  V.grid = g;
  V.values.resize(g.size());
  const double inv_dx = 1.0 / g.dx(), inv_dy = 1.0 / g.dy();
  const double inv_dv = 1.0 / g.dv(), inv_dth = 1.0 / g.dth();
  std::size_t i = 0;
  for (int ix = 0; ix < g.x.n; ++ix) {
    const double ddx = (g.xc(ix) - s0.x) * inv_dx;
    for (int iy = 0; iy < g.y.n; ++iy) {
      const double ddy = (g.yc(iy) - s0.y) * inv_dy;
      for (int iv = 0; iv < g.v.n; ++iv) {
        const double ddv = (g.vc(iv) - s0.v) * inv_dv;
        for (int ith = 0; ith < g.th.n; ++ith, ++i) {
          const double ddt = wrap_angle(g.thc(ith) - s0.theta) * inv_dth;
          V.values[i] =
              std::sqrt(ddx * ddx + ddy * ddy + ddv * ddv + ddt * ddt) - r0;
        }
      }
    }
  }
  return V;
}

double cfl_max_dt(const Grid4& g, const ControlInterval& box) {
  const double vmax = std::max(std::fabs(g.v.lo), std::fabs(g.v.hi));
  const double m3 = std::max(std::fabs(box.lo.u1), std::fabs(box.hi.u1));
  const double m4 = std::max(std::fabs(box.lo.u2), std::fabs(box.hi.u2));
  const double denom =
      vmax / g.dx() + vmax / g.dy() + m3 / g.dv() + m4 / g.dth();
  if (denom <= 0.0) {
    return 1e30;
  }
  return 0.8 / denom;
}

ValueGrid frt_step(const ValueGrid& V, const ControlInterval& box,
                   double dt_pde) {
  validate_grid(V.grid);
  check_box(box);
  if (V.values.size() != V.grid.size()) {
    throw std::invalid_argument("frt_step: value array does not match the grid");
  }
  if (!(dt_pde > 0.0) || !std::isfinite(dt_pde)) {
    throw std::invalid_argument("frt_step: dt_pde must be positive and finite");
  }
  if (dt_pde > cfl_max_dt(V.grid, box) * (1.0 + 1e-12)) {
    throw std::invalid_argument("frt_step: dt_pde violates the CFL bound");
  }
  ValueGrid out;
  out.grid = V.grid;
  out.values.resize(V.values.size());
  std::vector<double> scratch(V.values.size());
  detail::tube_substep(V.grid, V.values, box, dt_pde, out.values, scratch);
  return out;
}

std::vector<SpatialSet> generate_tubes(const AgentState& s0,
                                       const ControlIntervalSequence& intervals,
                                       const Grid4& grid, double dt) {
  if (intervals.steps.empty()) {
    throw std::invalid_argument("generate_tubes: empty interval sequence");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("generate_tubes: dt must be positive and finite");
  }
  ValueGrid V = seed_grid(grid, s0);
  std::vector<double> buf(V.values.size());
  std::vector<double> scratch(V.values.size());
  std::vector<SpatialSet> sets;
  sets.reserve(intervals.steps.size());
  for (const ControlInterval& box : intervals.steps) {
    check_box(box);
    const double dt_max = cfl_max_dt(grid, box);
    const int m = std::max(1, static_cast<int>(std::ceil(dt / dt_max - 1e-12)));
    const double delta = dt / m;
    for (int j = 0; j < m; ++j) {
      detail::tube_substep(grid, V.values, box, delta, buf, scratch);
      V.values.swap(buf);
    }
    sets.push_back(project_xy(V));
  }
  return sets;
}

SpatialSet project_xy(const ValueGrid& V) {
  const Grid4& g = V.grid;
  SpatialSet s;
  s.nx = g.x.n;
  s.ny = g.y.n;
  s.x0 = g.x.lo;
  s.y0 = g.y.lo;
  s.dx = g.dx();
  s.dy = g.dy();
  s.mask.assign(static_cast<std::size_t>(s.nx) * s.ny, 0);
  const std::size_t col = static_cast<std::size_t>(g.v.n) * g.th.n;
  for (int ix = 0; ix < g.x.n; ++ix) {
    for (int iy = 0; iy < g.y.n; ++iy) {
      const std::size_t from = g.index(ix, iy, 0, 0);
      double mn = V.values[from];
      for (std::size_t k = 1; k < col; ++k) {
        mn = std::min(mn, V.values[from + k]);
      }
      s.mask[static_cast<std::size_t>(ix) * s.ny + iy] = mn <= 0.0 ? 1 : 0;
    }
  }
  return s;
}

double set_area(const SpatialSet& s) {
  std::size_t count = 0;
  for (const std::uint8_t m : s.mask) {
    count += m;
  }
  return static_cast<double>(count) * s.dx * s.dy;
}

bool point_in_set(const SpatialSet& s, double px, double py) {
  const long ix = std::lround((px - s.x0) / s.dx);
  const long iy = std::lround((py - s.y0) / s.dy);
  if (ix < 0 || ix >= s.nx || iy < 0 || iy >= s.ny) {
    return false;
  }
  return s.mask[static_cast<std::size_t>(ix) * s.ny + iy] != 0;
}

double value_at(const ValueGrid& V, const AgentState& z) {
  return interp16(V, z, [&](int ix, int iy, int iv, int ith) {
    return V.values[V.grid.index(ix, iy, iv, ith)];
  });
}

std::array<double, 4> gradient_at(const ValueGrid& V, const AgentState& z) {
  std::array<double, 4> out{};
  for (int j = 0; j < 4; ++j) {
    out[j] = interp16(V, z, [&](int ix, int iy, int iv, int ith) {
      return node_gradient(V, ix, iy, iv, ith)[j];
    });
  }
  return out;
}

}  // namespace calreach
