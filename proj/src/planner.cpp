#include "calreach/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace calreach {

namespace {

void check_ego_box(const ControlInterval& box) {
  if (!std::isfinite(box.lo.u1) || !std::isfinite(box.hi.u1) ||
      !std::isfinite(box.lo.u2) || !std::isfinite(box.hi.u2) ||
      box.lo.u1 > box.hi.u1 || box.lo.u2 > box.hi.u2) {
    throw std::invalid_argument("planner: malformed ego control box");
  }
}

void check_set(const SpatialSet& s) {
  if (s.nx < 0 || s.ny < 0 || !(s.dx > 0.0) || !(s.dy > 0.0) ||
      s.mask.size() != static_cast<std::size_t>(s.nx) * s.ny) {
    throw std::invalid_argument("planner: malformed spatial set");
  }
}

void check_schedule(const ObstacleSchedule& obs) {
  for (const auto& step : obs.steps) {
    for (const SpatialSet& s : step) {
      check_set(s);
    }
  }
}

// Growth-optimal control component: argmax over [lo, hi] of p * u, coasting
// (or the box value nearest zero) when the costate component vanishes.
double bang_bang(double p, double lo, double hi) {
  if (p > 0.0) {
    return hi;
  }
  if (p < 0.0) {
    return lo;
  }
  return std::clamp(0.0, lo, hi);
}

}  // namespace

SpatialSet inflate_set(const SpatialSet& s, double radius) {
  check_set(s);
  if (!std::isfinite(radius) || radius < 0.0) {
    throw std::invalid_argument("inflate_set: radius must be finite and >= 0");
  }
  SpatialSet out = s;
  if (radius == 0.0 || s.nx == 0 || s.ny == 0) {
    return out;
  }
  const int rx = static_cast<int>(std::floor(radius / s.dx));
  const int ry = static_cast<int>(std::floor(radius / s.dy));
  std::vector<std::pair<int, int>> offsets;
  for (int di = -rx; di <= rx; ++di) {
    for (int dj = -ry; dj <= ry; ++dj) {
      if (std::hypot(di * s.dx, dj * s.dy) <= radius) {
        offsets.emplace_back(di, dj);
      }
    }
  }
  std::fill(out.mask.begin(), out.mask.end(), 0);
  for (int i = 0; i < s.nx; ++i) {
    for (int j = 0; j < s.ny; ++j) {
      if (!s.mask[static_cast<std::size_t>(i) * s.ny + j]) {
        continue;
      }
      for (const auto& [di, dj] : offsets) {
        const int ii = i + di;
        const int jj = j + dj;
        if (ii >= 0 && ii < s.nx && jj >= 0 && jj < s.ny) {
          out.mask[static_cast<std::size_t>(ii) * s.ny + jj] = 1;
        }
      }
    }
  }
  return out;
}

std::vector<ValueGrid> reach_avoid_tube(const AgentState& ego0,
                                        const ObstacleSchedule& obs,
                                        const ControlInterval& ego_box,
                                        const Grid4& grid, double dt) {
  validate_grid(grid);
  check_ego_box(ego_box);
  check_schedule(obs);
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw std::invalid_argument("reach_avoid_tube: dt must be positive");
  }
  if (!obs.steps.empty()) {
    for (const SpatialSet& s : obs.steps.front()) {
      if (point_in_set(s, ego0.x, ego0.y)) {
        throw std::runtime_error(
            "reach_avoid_tube: start state is inside an obstacle");
      }
    }
  }

  const std::size_t col = static_cast<std::size_t>(grid.v.n) * grid.th.n;
  // flat base index of every (x, y) column blocked at each step
  std::vector<std::vector<std::size_t>> blocked(obs.steps.size());
  for (std::size_t j = 0; j < obs.steps.size(); ++j) {
    for (int ix = 0; ix < grid.x.n; ++ix) {
      for (int iy = 0; iy < grid.y.n; ++iy) {
        const double cx = grid.xc(ix);
        const double cy = grid.yc(iy);
        for (const SpatialSet& s : obs.steps[j]) {
          if (point_in_set(s, cx, cy)) {
            blocked[j].push_back(grid.index(ix, iy, 0, 0));
            break;
          }
        }
      }
    }
  }

  ValueGrid V = seed_grid(grid, ego0);
  std::vector<ValueGrid> snapshots;
  snapshots.reserve(obs.steps.size() + 1);
  snapshots.push_back(V);

  const double dt_max = cfl_max_dt(grid, ego_box);
  const int m = std::max(1, static_cast<int>(std::ceil(dt / dt_max - 1e-12)));
  const double delta = dt / m;
  std::vector<double> buf(V.values.size());
  std::vector<double> scratch(V.values.size());
  for (std::size_t j = 0; j < obs.steps.size(); ++j) {
    for (int sub = 0; sub < m; ++sub) {
      detail::tube_substep(grid, V.values, ego_box, delta, buf, scratch);
      V.values.swap(buf);
      for (const std::size_t base : blocked[j]) {
        for (std::size_t d = 0; d < col; ++d) {
          V.values[base + d] = std::max(V.values[base + d], 1.0);
        }
      }
    }
    snapshots.push_back(V);
  }
  return snapshots;
}

namespace detail {

Plan extract_plan_traced(const std::vector<ValueGrid>& snapshots,
                         const AgentState& ego0, double goal_x, double goal_y,
                         double tol, const ObstacleSchedule& obs,
                         const ControlInterval& ego_box, double dt,
                         ExtractTrace* trace) {
  if (snapshots.empty()) {
    throw std::invalid_argument("extract_plan: no snapshots");
  }
  if (obs.steps.size() + 1 != snapshots.size()) {
    throw std::invalid_argument(
        "extract_plan: schedule does not match the snapshots");
  }
  check_ego_box(ego_box);
  check_schedule(obs);
  if (!std::isfinite(goal_x) || !std::isfinite(goal_y) ||
      !std::isfinite(tol) || tol < 0.0) {
    throw std::invalid_argument("extract_plan: malformed goal");
  }
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw std::invalid_argument("extract_plan: dt must be positive");
  }
  const Grid4& g = snapshots.front().grid;
  for (const ValueGrid& V : snapshots) {
    if (V.values.size() != g.size()) {
      throw std::invalid_argument("extract_plan: snapshot size mismatch");
    }
  }

  const double delta = dt / kPlanSubsteps;
  Plan plan;
  plan.controls.t0 = 0.0;
  plan.controls.dt = delta;
  plan.trajectory.t0 = 0.0;
  plan.trajectory.dt = delta;

  std::vector<std::pair<int, int>> near_goal;
  for (int ix = 0; ix < g.x.n; ++ix) {
    for (int iy = 0; iy < g.y.n; ++iy) {
      if (std::hypot(g.xc(ix) - goal_x, g.yc(iy) - goal_y) <= tol) {
        near_goal.emplace_back(ix, iy);
      }
    }
  }

  int k_star = -1;
  std::size_t seed_index = 0;
  for (std::size_t k = 0; k < snapshots.size() && k_star < 0; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [ix, iy] : near_goal) {
      const std::size_t base = g.index(ix, iy, 0, 0);
      const std::size_t col = static_cast<std::size_t>(g.v.n) * g.th.n;
      for (std::size_t d = 0; d < col; ++d) {
        const double val = snapshots[k].values[base + d];
        if (val < best) {
          best = val;
          seed_index = base + d;
        }
      }
    }
    if (best <= 0.0) {
      k_star = static_cast<int>(k);
    }
  }

  if (trace != nullptr) {
    trace->k_star = k_star;
    trace->seed_index = k_star >= 0 ? seed_index : 0;
    trace->backward.clear();
  }
  if (k_star < 0) {
    plan.trajectory.states.push_back(ego0);
    return plan;
  }
  plan.target_reached = true;
  if (k_star == 0) {
    plan.trajectory.states.push_back(ego0);
    plan.feasible = true;
    if (trace != nullptr) {
      trace->backward.push_back(ego0);
    }
    return plan;
  }

  const int ith = static_cast<int>(seed_index % g.th.n);
  const int iv = static_cast<int>(seed_index / g.th.n % g.v.n);
  const int iy = static_cast<int>(seed_index / g.th.n / g.v.n % g.y.n);
  const int ix = static_cast<int>(seed_index / g.th.n / g.v.n / g.y.n);
  AgentState z{g.xc(ix), g.yc(iy), g.vc(iv), g.thc(ith)};

  std::vector<AgentState> backward(k_star + 1);
  backward[k_star] = z;
  std::vector<Control> reversed;
  reversed.reserve(static_cast<std::size_t>(k_star) * kPlanSubsteps);
  for (int j = k_star; j >= 1; --j) {
    const ValueGrid& field = snapshots[j - 1];
    for (int sub = 0; sub < kPlanSubsteps; ++sub) {
      const std::array<double, 4> p = gradient_at(field, z);
      const Control u{bang_bang(p[2], ego_box.lo.u1, ego_box.hi.u1),
                      bang_bang(p[3], ego_box.lo.u2, ego_box.hi.u2)};
      reversed.push_back(u);
      z = flow(z, u, -delta);
    }
    backward[j - 1] = z;
    backward[j - 1].theta = wrap_angle(z.theta);
  }
  if (trace != nullptr) {
    trace->backward = backward;
  }

  plan.controls.controls.assign(reversed.rbegin(), reversed.rend());
  plan.trajectory = rollout(ego0, plan.controls);

  plan.feasible = true;
  for (int k = 1; k <= k_star && plan.feasible; ++k) {
    for (int sub = 1; sub <= kPlanSubsteps && plan.feasible; ++sub) {
      const AgentState& s =
          plan.trajectory.states[static_cast<std::size_t>(k - 1) *
                                     kPlanSubsteps +
                                 sub];
      for (const SpatialSet& set : obs.steps[k - 1]) {
        if (point_in_set(set, s.x, s.y)) {
          plan.feasible = false;
          break;
        }
      }
    }
  }
  return plan;
}

}  // namespace detail

Plan extract_plan(const std::vector<ValueGrid>& snapshots,
                  const AgentState& ego0, double goal_x, double goal_y,
                  double tol, const ObstacleSchedule& obs,
                  const ControlInterval& ego_box, double dt) {
  return detail::extract_plan_traced(snapshots, ego0, goal_x, goal_y, tol, obs,
                                     ego_box, dt, nullptr);
}

std::pair<double, double> fallback_target(
    const std::vector<ValueGrid>& snapshots, double goal_x, double goal_y) {
  if (snapshots.empty()) {
    throw std::invalid_argument("fallback_target: no snapshots");
  }
  if (!std::isfinite(goal_x) || !std::isfinite(goal_y)) {
    throw std::invalid_argument("fallback_target: malformed goal");
  }
  const SpatialSet proj = project_xy(snapshots.back());
  double best = std::numeric_limits<double>::infinity();
  std::pair<double, double> target{0.0, 0.0};
  bool found = false;
  for (int ix = 0; ix < proj.nx; ++ix) {
    for (int iy = 0; iy < proj.ny; ++iy) {
      if (!proj.mask[static_cast<std::size_t>(ix) * proj.ny + iy]) {
        continue;
      }
      const double cx = proj.x0 + ix * proj.dx;
      const double cy = proj.y0 + iy * proj.dy;
      // ascending (ix, iy) scan with strict improvement keeps the
      // lexicographically smaller cell on ties
      const double d = std::hypot(cx - goal_x, cy - goal_y);
      if (d < best) {
        best = d;
        target = {cx, cy};
        found = true;
      }
    }
  }
  if (!found) {
    throw std::runtime_error("fallback_target: final reachable set is empty");
  }
  return target;
}

}  // namespace calreach
