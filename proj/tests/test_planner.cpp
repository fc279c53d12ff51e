#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "calreach/core.hpp"
#include "calreach/planner.hpp"
#include "calreach/reachability.hpp"
#include "oracles.hpp"

using namespace calreach;

namespace {

Grid4 small_grid(double extent, int nxy, double vlo, double vhi, int nv,
                 int nth) {
  Grid4 g;
  g.x = {-extent / 2, extent / 2, nxy};
  g.y = {-extent / 2, extent / 2, nxy};
  g.v = {vlo, vhi, nv};
  g.th = {-kPi, kPi, nth};
  return g;
}

SpatialSet blank_set(const Grid4& g) {
  SpatialSet s;
  s.nx = g.x.n;
  s.ny = g.y.n;
  s.x0 = g.x.lo;
  s.y0 = g.y.lo;
  s.dx = g.dx();
  s.dy = g.dy();
  s.mask.assign(static_cast<std::size_t>(s.nx) * s.ny, 0);
  return s;
}

ObstacleSchedule empty_schedule(std::size_t h) {
  ObstacleSchedule obs;
  obs.steps.assign(h, {});
  return obs;
}

bool subset(const SpatialSet& a, const SpatialSet& b) {
  REQUIRE(a.mask.size() == b.mask.size());
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (a.mask[i] && !b.mask[i]) {
      return false;
    }
  }
  return true;
}

// Full-width vertical wall at x = 0 with a |y| <= 1 gap.
SpatialSet gapped_wall(const Grid4& g) {
  SpatialSet s = blank_set(g);
  const int wall_ix = (g.x.n - 1) / 2;
  for (int iy = 0; iy < s.ny; ++iy) {
    if (std::fabs(g.yc(iy)) > 1.0) {
      s.mask[static_cast<std::size_t>(wall_ix) * s.ny + iy] = 1;
    }
  }
  return s;
}

int cfl_substeps(const Grid4& g, const ControlInterval& box, double dt) {
  return std::max(
      1, static_cast<int>(std::ceil(dt / cfl_max_dt(g, box) - 1e-12)));
}

}  // namespace

TEST_CASE("inflation dilates by a disc") {
  SpatialSet s;
  s.nx = 11;
  s.ny = 11;
  s.x0 = -5.0;
  s.y0 = -5.0;
  s.dx = 1.0;
  s.dy = 1.0;
  s.mask.assign(121, 0);
  s.mask[5 * 11 + 5] = 1;

  const SpatialSet grown = inflate_set(s, 2.0);
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const bool expect = std::hypot(i - 5, j - 5) <= 2.0;
      CHECK(grown.mask[i * 11 + j] == (expect ? 1 : 0));
    }
  }

  const SpatialSet same = inflate_set(s, 0.0);
  CHECK(same.mask == s.mask);

  SpatialSet empty = s;
  std::fill(empty.mask.begin(), empty.mask.end(), 0);
  CHECK(set_area(inflate_set(empty, 3.0)) == 0.0);

  CHECK_THROWS_AS(inflate_set(s, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(inflate_set(s, std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  SpatialSet bad = s;
  bad.mask.pop_back();
  CHECK_THROWS_AS(inflate_set(bad, 1.0), std::invalid_argument);
}

TEST_CASE("inflation preserves nesting") {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 5; ++rep) {
    SpatialSet big;
    big.nx = 15;
    big.ny = 15;
    big.x0 = 0.0;
    big.y0 = 0.0;
    big.dx = 0.5;
    big.dy = 0.5;
    big.mask.assign(225, 0);
    for (int c = 0; c < 60; ++c) {
      big.mask[rng() % 225] = 1;
    }
    SpatialSet sub = big;
    for (int c = 0; c < 30; ++c) {
      sub.mask[rng() % 225] = 0;
    }
    REQUIRE(subset(sub, big));
    CHECK(subset(inflate_set(sub, 1.3), inflate_set(big, 1.3)));
  }
}

TEST_CASE("reach-avoid tube without obstacles matches the plain tube") {
  const Grid4 g = small_grid(16, 17, 0, 3, 4, 9);
  const AgentState s0{-2, 1, 1.5, 0.5};
  const ControlInterval box{{-0.4, -0.5}, {0.4, 0.5}};
  const double dt = 0.5;
  const std::size_t h = 3;

  const std::vector<ValueGrid> snaps =
      reach_avoid_tube(s0, empty_schedule(h), box, g, dt);
  REQUIRE(snaps.size() == h + 1);

  ValueGrid V = seed_grid(g, s0);
  CHECK(snaps[0].values == V.values);
  const int m = cfl_substeps(g, box, dt);
  for (std::size_t k = 1; k <= h; ++k) {
    for (int sub = 0; sub < m; ++sub) {
      V = frt_step(V, box, dt / m);
    }
    CHECK(snaps[k].values == V.values);
  }

  ControlIntervalSequence seq;
  seq.dt = dt;
  seq.steps.assign(h, box);
  const std::vector<SpatialSet> sets = generate_tubes(s0, seq, g, dt);
  for (std::size_t k = 0; k < h; ++k) {
    CHECK(project_xy(snaps[k + 1]).mask == sets[k].mask);
  }
}

TEST_CASE("reach-avoid tube input validation") {
  const Grid4 g = small_grid(12, 13, 0, 3, 4, 9);
  const AgentState s0{0, 0, 1, 0};
  const ControlInterval box{{-0.4, -0.5}, {0.4, 0.5}};

  SpatialSet wall = blank_set(g);
  std::fill(wall.mask.begin(), wall.mask.end(), 1);
  ObstacleSchedule obs;
  obs.steps.assign(2, {wall});
  CHECK_THROWS_AS(reach_avoid_tube(s0, obs, box, g, 0.5), std::runtime_error);

  CHECK_THROWS_AS(reach_avoid_tube(s0, empty_schedule(1), box, g, 0.0),
                  std::invalid_argument);

  SpatialSet bad = blank_set(g);
  bad.mask.pop_back();
  ObstacleSchedule malformed;
  malformed.steps.assign(1, {bad});
  CHECK_THROWS_AS(reach_avoid_tube(s0, malformed, box, g, 0.5),
                  std::invalid_argument);

  ControlInterval inverted{{0.4, 0.0}, {-0.4, 0.0}};
  CHECK_THROWS_AS(reach_avoid_tube(s0, empty_schedule(1), inverted, g, 0.5),
                  std::invalid_argument);
}

TEST_CASE("blockage outside the start cell stops all growth") {
  const Grid4 g = small_grid(12, 13, 0, 3, 4, 9);
  const AgentState s0{0, 0, 1, 0};
  const ControlInterval box{{-0.4, -0.5}, {0.4, 0.5}};

  SpatialSet wall = blank_set(g);
  std::fill(wall.mask.begin(), wall.mask.end(), 1);
  const int cx = (g.x.n - 1) / 2;
  const int cy = (g.y.n - 1) / 2;
  wall.mask[static_cast<std::size_t>(cx) * wall.ny + cy] = 0;
  ObstacleSchedule obs;
  obs.steps.assign(3, {wall});

  const std::vector<ValueGrid> snaps = reach_avoid_tube(s0, obs, box, g, 0.5);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const SpatialSet proj = project_xy(snaps[k]);
    CHECK(set_area(proj) == proj.dx * proj.dy);
    CHECK(point_in_set(proj, 0, 0));
  }

  const Plan plan = extract_plan(snaps, s0, 4.0, 0.0, 1.0, obs, box, 0.5);
  CHECK_FALSE(plan.target_reached);
  CHECK_FALSE(plan.feasible);
  CHECK(plan.controls.controls.empty());
  REQUIRE(plan.trajectory.states.size() == 1);
  CHECK(plan.trajectory.states[0].x == s0.x);

  const auto [fx, fy] = fallback_target(snaps, 4.0, 0.0);
  CHECK(fx == doctest::Approx(0.0));
  CHECK(fy == doctest::Approx(0.0));
}

TEST_CASE("corridor gap admits only wall-avoiding rollouts") {
  const Grid4 g = small_grid(20, 21, -1, 4, 6, 13);
  const AgentState s0{-6, 0, 2, 0};
  const ControlInterval box{{-0.5, -0.6}, {0.5, 0.6}};
  const double dt = 0.5;
  const std::size_t h = 6;

  const SpatialSet wall = gapped_wall(g);
  ObstacleSchedule obs;
  obs.steps.assign(h, {wall});
  const std::vector<ValueGrid> snaps = reach_avoid_tube(s0, obs, box, g, dt);
  std::vector<SpatialSet> projs;
  for (std::size_t k = 1; k <= h; ++k) {
    projs.push_back(project_xy(snaps[k]));
  }

  // any rollout that respects the wall at every active step stays in the tube
  std::mt19937_64 rng(2024);
  int checked = 0;
  int misses = 0;
  for (int trial = 0; trial < 400; ++trial) {
    AgentState z = s0;
    bool avoided = true;
    for (std::size_t k = 0; k < h && avoided; ++k) {
      const Control u{oracle::uniform(rng, box.lo.u1, box.hi.u1),
                      oracle::uniform(rng, box.lo.u2, box.hi.u2)};
      for (int sub = 0; sub < kPlanSubsteps; ++sub) {
        z = dubins_step(z, u, dt / kPlanSubsteps);
        if (point_in_set(wall, z.x, z.y)) {
          avoided = false;
          break;
        }
      }
      if (avoided) {
        ++checked;
        if (!point_in_set(projs[k], z.x, z.y)) {
          ++misses;
        }
      }
    }
  }
  CHECK(checked > 1200);
  CHECK(misses * 1000 <= checked);

  // cells behind the wall that need more path than the horizon allows
  for (const SpatialSet& proj : projs) {
    CHECK_FALSE(point_in_set(proj, 1, 6));
    CHECK_FALSE(point_in_set(proj, 1, -6));
    CHECK_FALSE(point_in_set(proj, 1, 4));
  }
  // straight through the gap is reachable by the last step
  CHECK(point_in_set(projs[h - 1], 1, 0));
}

TEST_CASE("trivial plan when already at the goal") {
  const Grid4 g = small_grid(12, 13, 0, 3, 4, 9);
  const AgentState s0{0.3, -0.2, 1, 0.4};
  const ControlInterval box{{-0.4, -0.5}, {0.4, 0.5}};

  const std::vector<ValueGrid> snaps =
      reach_avoid_tube(s0, empty_schedule(2), box, g, 0.5);
  const Plan plan =
      extract_plan(snaps, s0, s0.x, s0.y, 1.5, empty_schedule(2), box, 0.5);
  CHECK(plan.target_reached);
  CHECK(plan.feasible);
  CHECK(plan.controls.controls.empty());
  REQUIRE(plan.trajectory.states.size() == 1);
  CHECK(plan.trajectory.states[0].x == s0.x);
  CHECK(plan.trajectory.states[0].y == s0.y);
  CHECK(plan.trajectory.states[0].v == s0.v);
  CHECK(plan.trajectory.states[0].theta == s0.theta);
}

TEST_CASE("straight-ahead goal lands near the bang-bang optimum") {
  const Grid4 g = small_grid(30, 31, -1, 5, 7, 13);
  const AgentState s0{-5, 0, 2, 0};
  const ControlInterval box{{-1.0, -0.6}, {1.0, 0.6}};
  const double dt = 0.5;
  const std::size_t h = 6;
  const double tol = 1.0;

  // goal at the full-throttle straight-line position after 2 s
  ControlSequence full;
  full.dt = dt / kPlanSubsteps;
  full.controls.assign(4 * kPlanSubsteps, Control{1.0, 0.0});
  const AgentState far = rollout(s0, full).states.back();
  const double goal_x = far.x;
  const double goal_y = far.y;

  const ObstacleSchedule obs = empty_schedule(h);
  const std::vector<ValueGrid> snaps = reach_avoid_tube(s0, obs, box, g, dt);
  const Plan plan = extract_plan(snaps, s0, goal_x, goal_y, tol, obs, box, dt);
  CHECK(plan.target_reached);
  CHECK(plan.feasible);
  REQUIRE_FALSE(plan.controls.controls.empty());

  for (const Control& u : plan.controls.controls) {
    CHECK(u.u1 >= box.lo.u1);
    CHECK(u.u1 <= box.hi.u1);
    CHECK(u.u2 >= box.lo.u2);
    CHECK(u.u2 <= box.hi.u2);
  }

  const AgentState end = plan.trajectory.states.back();
  CHECK(std::hypot(end.x - goal_x, end.y - goal_y) <=
        tol + 2.0 * std::hypot(g.dx(), g.dy()));
}

TEST_CASE("corridor plan satisfies the avoidance timing rule") {
  const Grid4 g = small_grid(20, 21, -1, 4, 6, 13);
  const AgentState s0{-6, 0, 2, 0};
  const ControlInterval box{{-0.5, -0.6}, {0.5, 0.6}};
  const double dt = 0.5;
  const std::size_t h = 6;

  const SpatialSet wall = gapped_wall(g);
  ObstacleSchedule obs;
  obs.steps.assign(h, {wall});
  const std::vector<ValueGrid> snaps = reach_avoid_tube(s0, obs, box, g, dt);

  detail::ExtractTrace trace;
  const Plan plan = detail::extract_plan_traced(snaps, s0, 3.0, 0.0, 1.0, obs,
                                                box, dt, &trace);
  CHECK(plan.target_reached);
  CHECK(plan.feasible);
  REQUIRE(trace.k_star >= 1);
  REQUIRE(plan.controls.controls.size() ==
          static_cast<std::size_t>(trace.k_star) * kPlanSubsteps);

  // trajectory is exactly the rollout of the control sequence
  const Trajectory redo = rollout(s0, plan.controls);
  REQUIRE(redo.states.size() == plan.trajectory.states.size());
  for (std::size_t i = 0; i < redo.states.size(); ++i) {
    CHECK(redo.states[i].x == plan.trajectory.states[i].x);
    CHECK(redo.states[i].y == plan.trajectory.states[i].y);
    CHECK(redo.states[i].v == plan.trajectory.states[i].v);
    CHECK(redo.states[i].theta == plan.trajectory.states[i].theta);
  }

  // the timing rule, re-derived from the output: subpoints of interval k
  // avoid every step-k set
  for (int k = 1; k <= trace.k_star; ++k) {
    for (int sub = 1; sub <= kPlanSubsteps; ++sub) {
      const AgentState& s =
          plan.trajectory.states[(k - 1) * kPlanSubsteps + sub];
      CHECK_FALSE(point_in_set(wall, s.x, s.y));
    }
  }

  for (const Control& u : plan.controls.controls) {
    CHECK(u.u1 >= box.lo.u1);
    CHECK(u.u1 <= box.hi.u1);
    CHECK(u.u2 >= box.lo.u2);
    CHECK(u.u2 <= box.hi.u2);
  }
}

TEST_CASE("extraction stays consistent with the snapshots") {
  const Grid4 g = small_grid(20, 21, -1, 4, 6, 13);
  const AgentState s0{-6, 0, 2, 0};
  const ControlInterval box{{-0.5, -0.6}, {0.5, 0.6}};
  const double dt = 0.5;
  const std::size_t h = 6;

  const SpatialSet wall = gapped_wall(g);
  ObstacleSchedule obs;
  obs.steps.assign(h, {wall});
  const std::vector<ValueGrid> snaps = reach_avoid_tube(s0, obs, box, g, dt);

  detail::ExtractTrace trace;
  const Plan plan = detail::extract_plan_traced(snaps, s0, 3.0, 0.0, 1.0, obs,
                                                box, dt, &trace);
  REQUIRE(plan.target_reached);
  REQUIRE(trace.k_star >= 1);

  // seed node is in the step-k* tube
  CHECK(snaps[trace.k_star].values[trace.seed_index] <= 0.0);

  // backward states stay inside the matching snapshot, one cell of slack
  REQUIRE(trace.backward.size() == static_cast<std::size_t>(trace.k_star) + 1);
  const double cell = std::hypot(g.dx(), g.dy());
  for (int j = 0; j <= trace.k_star; ++j) {
    const AgentState& z = trace.backward[j];
    CHECK(value_at(snaps[j], z) <= 1.0 + 1e-9);
    const SpatialSet slack = inflate_set(project_xy(snaps[j]), cell);
    CHECK(point_in_set(slack, z.x, z.y));
  }
}

TEST_CASE("fallback target picks the nearest covered cell") {
  const Grid4 g = small_grid(12, 13, 0, 3, 4, 9);
  ValueGrid V;
  V.grid = g;
  V.values.assign(g.size(), 1.0);

  std::vector<ValueGrid> snaps{V};
  CHECK_THROWS_AS(fallback_target(snaps, 0.0, 0.0), std::runtime_error);

  // single covered cell at (2, 0)
  snaps[0].values[g.index(8, 6, 0, 0)] = -1.0;
  auto [nx, ny] = fallback_target(snaps, 10.0, 0.0);
  CHECK(nx == doctest::Approx(2.0));
  CHECK(ny == doctest::Approx(0.0));

  // goal inside a covered cell resolves to that cell
  snaps[0].values[g.index(9, 6, 0, 0)] = -1.0;
  auto [ox, oy] = fallback_target(snaps, 2.3, 0.2);
  CHECK(ox == doctest::Approx(2.0));
  CHECK(oy == doctest::Approx(0.0));

  // equidistant cells break ties toward the lexicographically smaller one
  std::vector<ValueGrid> tie{V};
  tie[0].values[g.index(4, 6, 0, 0)] = -1.0;
  tie[0].values[g.index(8, 6, 0, 0)] = -1.0;
  auto [tx, ty] = fallback_target(tie, 0.0, 0.0);
  CHECK(tx == doctest::Approx(-2.0));
  CHECK(ty == doctest::Approx(0.0));
}
