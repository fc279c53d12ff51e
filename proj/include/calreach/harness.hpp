#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "calreach/config.hpp"
#include "calreach/conformal.hpp"
#include "calreach/core.hpp"
#include "calreach/forecaster.hpp"
#include "calreach/planner.hpp"
#include "calreach/reachability.hpp"

namespace calreach {

struct AgentRecord {
  int id = 0;
  Trajectory recorded;
};

// Replayed scene. All recordings share t0, dt, and length; the recordings
// must span calib_steps + eval_steps + horizon steps so every evaluated
// issue matures inside the data.
struct Scenario {
  double dt = 0.5;
  std::vector<AgentRecord> agents;
  int ego_id = 0;
  double goal_x = 0.0;
  double goal_y = 0.0;
  std::int64_t calib_steps = 0;
  std::int64_t eval_steps = 0;
};

// One issued prediction for one agent. The maturity fields (u_obs, miss,
// pos_covered) are filled h steps later against the agent's recording.
struct AgentIssue {
  int agent_id = 0;
  Forecast forecast;
  ControlIntervalSequence intervals;
  std::vector<SpatialSet> sets;  // per step offset; empty when tubes skipped
  std::vector<double> areas;
  bool evaluated = false;
  ControlSequence u_obs;
  std::vector<std::uint8_t> miss;         // per offset: control outside box
  std::vector<std::uint8_t> pos_covered;  // per offset: position in set
};

// Everything issued at one timestep, plus the post-update conformal state
// (keyed by agent id, or -1 for the shared state).
struct IssueRecord {
  std::int64_t t = 0;
  std::vector<int> selected;
  std::vector<AgentIssue> agents;
  std::map<int, std::vector<double>> theta_after;
};

struct PlanRecord {
  std::int64_t t = 0;
  Plan plan;
  double target_x = 0.0;
  double target_y = 0.0;
  bool used_fallback = false;
  bool braked = false;  // no executable plan; ego braked to a stop instead
};

struct EpisodeLog {
  Scenario scenario;
  double alpha = 0.05;
  bool calibrated = true;
  bool tubes = true;
  std::vector<IssueRecord> issues;
  std::vector<PlanRecord> plans;
  // one state per step 0..calib+eval: the recording during calibration, the
  // planned motion afterwards (the recording throughout when tubes are off)
  Trajectory ego_executed;
};

// Replays one scenario under the config: per step, predicts for the N
// closest agents, builds calibrated control intervals, generates occupancy
// tubes (from calib - h on, when enabled), plans and steps the ego during
// the evaluation window, and h steps after each issue scores it against the
// recording and updates the quantile and conformal state. Deterministic for
// a fixed (scenario, config).
EpisodeLog run_episode(const Scenario& sc, const RunConfig& cfg);

// Mean over matured issues with occupancy sets of the joint indicator "every
// selected agent's true position at offset k lies in its set". k in 1..h.
// Throws std::invalid_argument when no issue qualifies.
double coverage_rate(const EpisodeLog& log, int k);

// Mean over matured (issue, agent) pairs of the per-offset interval hit
// 1 - miss[k-1]. k in 1..h. Throws std::invalid_argument when none qualify.
double interval_coverage(const EpisodeLog& log, int k);

// Planned ego's min distance to any agent over the evaluation steps divided
// by the recorded ego's min distance over the same steps ((x, y) Euclidean).
// Absent when the recorded minimum is zero or the scene has no other agents.
std::optional<double> conservatism(const EpisodeLog& log);

// 1 - |goal - final| / |goal - eval start| in (x, y). Throws
// std::invalid_argument when the eval start coincides with the goal.
double progress(const EpisodeLog& log);

// True iff at any evaluation step the executed ego is within radius
// (inclusive) of any non-ego agent's recorded position.
bool collision_check(const EpisodeLog& log, double radius);

}  // namespace calreach
