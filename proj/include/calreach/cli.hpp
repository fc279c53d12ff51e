#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "calreach/harness.hpp"

namespace calreach {

// key=value lines ('#' starts a comment); keys mirror the RunConfig fields.
// Unknown keys, malformed lines, and out-of-range values throw
// std::invalid_argument naming the key.
RunConfig parse_config_text(const std::string& text);

// File text first, then override tokens ("key=value"); an override wins.
RunConfig parse_config(const std::string& file_text,
                       const std::vector<std::string>& overrides);

// Scenario schema:
// {"dt": .., "agents": [{"id": .., "states": [[x, y, v, theta], ..]}, ..],
//  "ego_id": .., "goal": [x, y], "calib_steps": .., "eval_steps": ..}
// Serialization round-trips bit-exact doubles; parse(serialize(sc)) == sc.
std::string scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const std::string& text);

enum class ScenarioFamily {
  kIntersection,       // ego crosses one straight-driving agent at right angles
  kCorridor,           // oncoming agent in the adjacent lane
  kRandomConstantTurn, // five agents on random constant-control arcs
  kShiftingNoise       // long becalmed scene for calibration experiments
};

// Accepts "intersection", "corridor", "random-constant-turn",
// "shifting-noise"; anything else throws std::invalid_argument.
ScenarioFamily family_from_name(const std::string& name);

// Deterministic per (family, count, seed); every trajectory is produced by
// the vehicle dynamics so estimated controls regenerate it via rollout.
std::vector<Scenario> generate_scenarios(ScenarioFamily family, int count,
                                         std::uint64_t seed);

struct EpisodeOutcome {
  std::string scene;
  bool failed = false;
  std::string error;
  EpisodeLog log;  // default-constructed when failed
};

// coverage.csv: step,coverage_mean,coverage_se,area_mean,area_se with one
// row per prediction step. Coverage is occupancy-set coverage when tubes ran,
// interval coverage otherwise; area cells are "na" without tubes.
// planning.csv: scene,progress,collision,conservatism,calibrated with one
// row per scene in input order; unavailable metrics and failed scenes
// report "na". Values are printed with six decimals; the standard error of
// a single scene is 0.
struct BatchResult {
  std::vector<EpisodeOutcome> episodes;
  std::string coverage_csv;
  std::string planning_csv;
};

// Runs every scene in order (failures recorded, batch continues) and
// aggregates the CSV tables. Deterministic for fixed inputs.
BatchResult run_batch(const RunConfig& cfg,
                      const std::vector<std::pair<std::string, Scenario>>&
                          scenes);

// Compact per-episode summary (metrics, per-step coverage, plan counters).
std::string episode_to_json(const EpisodeOutcome& outcome);

// Top-down SVG of the issue at timestep t: per-step occupancy sets in a red
// ramp with earlier steps drawn above later ones, recorded agents, the
// executed ego, the goal marker, and the step's plan polyline when present.
// Byte-deterministic; throws std::invalid_argument when t has no issue.
std::string render_scene(const EpisodeLog& log, std::int64_t t);

}  // namespace calreach
