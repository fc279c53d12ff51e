#pragma once

#include <cstdint>
#include <string>

#include "calreach/conformal.hpp"
#include "calreach/core.hpp"
#include "calreach/reachability.hpp"

namespace calreach {

enum class ForecasterKind { kConstantControl, kOracleNoise };

// Every knob of an episode or batch run. Defaults follow the method's
// reference setup: dt = 0.5 s, horizon 6, history 8, gamma = 0.05 over the
// N = 3 closest agents.
struct RunConfig {
  double gamma = 0.05;
  int n_closest = 3;
  double xi = 0.05;
  double zeta = 0.01;
  StretchMode stretch_mode = StretchMode::kLinear;
  double stretch_c = 1.0;

  ForecasterKind forecaster = ForecasterKind::kConstantControl;
  std::size_t horizon = 6;
  std::size_t history = 8;
  double dt = 0.5;

  // constant-control forecaster knobs
  Control cc_mode_offset{0.5, 0.1};
  double cc_var_base = 0.04;
  double cc_var_growth = 0.02;

  // oracle-noise forecaster knobs
  double on_noise_std = 0.2;
  double on_noise_growth = 0.3;
  std::int64_t on_shift_step = -1;
  double on_shift_factor = 1.0;

  // occupancy window: an extent x extent box recentered per agent per issue,
  // with the shared speed and heading axes
  double grid_extent = 40.0;
  int grid_nxy = 41;
  double grid_vlo = -2.0;
  double grid_vhi = 20.0;
  int grid_nv = 11;
  int grid_nth = 25;

  // ego actuation limits and planning knobs
  ControlInterval ego_box{Control{-3.0, -1.0}, Control{3.0, 1.0}};
  double r_ego = 2.0;
  double r_agent = 2.0;
  double goal_tol = 2.0;

  // ablations and modes
  bool no_conformal = false;
  bool no_covariance_features = false;
  bool per_agent_state = false;
  bool tubes = true;
  // per-agent miss level; overrides corrected_alpha(gamma, n_closest) when
  // in [0, 1)
  double alpha_override = -1.0;

  std::uint64_t seed = 0;
};

// Throws std::invalid_argument naming the offending field.
void validate_config(const RunConfig& cfg);

// The config's occupancy window centered at (cx, cy).
Grid4 config_grid(const RunConfig& cfg, double cx, double cy);

// The per-agent miss level the config implies: alpha_override when set,
// otherwise corrected_alpha(gamma, n_closest).
double config_alpha(const RunConfig& cfg);

}  // namespace calreach
