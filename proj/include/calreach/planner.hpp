#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "calreach/conformal.hpp"
#include "calreach/core.hpp"
#include "calreach/reachability.hpp"

namespace calreach {

// Fine substeps per planning interval: plans are emitted and executed at
// dt / kPlanSubsteps, and safety is checked at the same subpoints.
inline constexpr int kPlanSubsteps = 10;

// Time-indexed obstacle occupancy. steps[j][i] is agent i's inflated spatial
// set constraining ego positions over (j*dt, (j+1)*dt]; the planning horizon
// is steps.size() intervals.
struct ObstacleSchedule {
  std::vector<std::vector<SpatialSet>> steps;
};

// Planner output. trajectory is always rollout(start state, controls) at the
// fine spacing. feasible: every trajectory position with time in
// ((k-1)*dt, k*dt] lies outside all step-k obstacle sets. target_reached:
// the tube search found a node near the requested goal; false for the
// degenerate no-path plan, whose controls are empty.
struct Plan {
  ControlSequence controls;
  Trajectory trajectory;
  bool feasible = false;
  bool target_reached = false;
};

// Disc dilation by radius (meters): a cell is covered iff some covered input
// cell center lies within radius of its center. Monotone, so nested inputs
// stay nested. radius must be finite and >= 0.
SpatialSet inflate_set(const SpatialSet& s, double radius);

// Ego forward reach-avoid tube. Seeds at ego0, then propagates one dt per
// schedule step (CFL substeps, frozen as in generate_tubes), after every
// substep overwriting obstacle-covered (x, y) columns with a +1 barrier;
// free columns are untouched, so an empty schedule reproduces the plain tube
// exactly. Returns steps.size() + 1 snapshots: snapshot 0 is the seed,
// snapshot k the value grid after step k. Throws std::runtime_error when
// ego0 lies inside a step-1 obstacle (infeasible start).
std::vector<ValueGrid> reach_avoid_tube(const AgentState& ego0,
                                        const ObstacleSchedule& obs,
                                        const ControlInterval& ego_box,
                                        const Grid4& grid, double dt);

// Plan extraction from reach-avoid snapshots. Finds the earliest step k*
// whose tube covers a grid column within tol (meters) of the goal, seeds at
// the value-minimizing node there, integrates backward to time zero applying
// the growth-optimal bang-bang control of the interpolated costate
// (kPlanSubsteps substeps per interval against the previous snapshot), and
// returns the forward rollout of the reversed controls from ego0. feasible
// comes from checking that rollout against obs (which must be the schedule
// the snapshots were built with). k* = 0 yields a trivial target-reached
// plan; no covered column within tol yields the degenerate plan.
Plan extract_plan(const std::vector<ValueGrid>& snapshots,
                  const AgentState& ego0, double goal_x, double goal_y,
                  double tol, const ObstacleSchedule& obs,
                  const ControlInterval& ego_box, double dt);

// Center of the final snapshot's covered cell closest to the goal (Euclidean
// distance between goal and cell centers; ties broken by lower (x, y)
// lexicographic order). Throws std::runtime_error when that projection is
// empty: the ego is trapped.
std::pair<double, double> fallback_target(
    const std::vector<ValueGrid>& snapshots, double goal_x, double goal_y);

namespace detail {

// Extraction internals recorded for validation: the chosen step k_star, the
// flat index of the seed node in snapshot k_star, and the backward-integrated
// states at interval boundaries; backward[j] is the state at time j*dt, so
// backward[k_star] is the seed node state. k_star = -1 when no column within
// tol is covered by any snapshot.
struct ExtractTrace {
  int k_star = -1;
  std::size_t seed_index = 0;
  std::vector<AgentState> backward;
};

// extract_plan with an optional trace output (ignored when null).
Plan extract_plan_traced(const std::vector<ValueGrid>& snapshots,
                         const AgentState& ego0, double goal_x, double goal_y,
                         double tol, const ObstacleSchedule& obs,
                         const ControlInterval& ego_box, double dt,
                         ExtractTrace* trace);

}  // namespace detail

}  // namespace calreach
