#include "calreach/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace calreach {

namespace {

void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: " + field + " " + why);
}

void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) {
    fail(field, "must be finite");
  }
}

}  // namespace

void validate_config(const RunConfig& cfg) {
  require_finite(cfg.gamma, "gamma");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) {
    fail("gamma", "must be in [0, 1)");
  }
  if (cfg.n_closest < 1) {
    fail("n_closest", "must be >= 1");
  }
  require_finite(cfg.xi, "xi");
  if (cfg.xi <= 0.0) {
    fail("xi", "must be > 0");
  }
  require_finite(cfg.zeta, "zeta");
  if (cfg.zeta <= 0.0) {
    fail("zeta", "must be > 0");
  }
  require_finite(cfg.stretch_c, "stretch_c");
  if (cfg.stretch_c <= 0.0) {
    fail("stretch_c", "must be > 0");
  }
  if (cfg.horizon < 1) {
    fail("horizon", "must be >= 1");
  }
  if (cfg.history < 2) {
    fail("history", "must be >= 2");
  }
  require_finite(cfg.dt, "dt");
  if (cfg.dt <= 0.0) {
    fail("dt", "must be > 0");
  }
  require_finite(cfg.cc_var_base, "cc_var_base");
  if (cfg.cc_var_base < 0.0) {
    fail("cc_var_base", "must be >= 0");
  }
  require_finite(cfg.cc_var_growth, "cc_var_growth");
  if (cfg.cc_var_growth < 0.0) {
    fail("cc_var_growth", "must be >= 0");
  }
  require_finite(cfg.on_noise_std, "on_noise_std");
  if (cfg.on_noise_std < 0.0) {
    fail("on_noise_std", "must be >= 0");
  }
  require_finite(cfg.on_noise_growth, "on_noise_growth");
  if (cfg.on_noise_growth < 0.0) {
    fail("on_noise_growth", "must be >= 0");
  }
  require_finite(cfg.on_shift_factor, "on_shift_factor");
  if (cfg.on_shift_factor < 0.0) {
    fail("on_shift_factor", "must be >= 0");
  }
  validate_grid(config_grid(cfg, 0.0, 0.0));
  require_finite(cfg.ego_box.lo.u1, "ego_box");
  require_finite(cfg.ego_box.hi.u1, "ego_box");
  require_finite(cfg.ego_box.lo.u2, "ego_box");
  require_finite(cfg.ego_box.hi.u2, "ego_box");
  if (cfg.ego_box.lo.u1 > cfg.ego_box.hi.u1 ||
      cfg.ego_box.lo.u2 > cfg.ego_box.hi.u2) {
    fail("ego_box", "must have lo <= hi per dimension");
  }
  require_finite(cfg.r_ego, "r_ego");
  if (cfg.r_ego < 0.0) {
    fail("r_ego", "must be >= 0");
  }
  require_finite(cfg.r_agent, "r_agent");
  if (cfg.r_agent < 0.0) {
    fail("r_agent", "must be >= 0");
  }
  require_finite(cfg.goal_tol, "goal_tol");
  if (cfg.goal_tol < 0.0) {
    fail("goal_tol", "must be >= 0");
  }
  if (std::isfinite(cfg.alpha_override) && cfg.alpha_override >= 1.0) {
    fail("alpha_override", "must be < 1");
  }
}

Grid4 config_grid(const RunConfig& cfg, double cx, double cy) {
  Grid4 g;
  g.x = {cx - cfg.grid_extent / 2, cx + cfg.grid_extent / 2, cfg.grid_nxy};
  g.y = {cy - cfg.grid_extent / 2, cy + cfg.grid_extent / 2, cfg.grid_nxy};
  g.v = {cfg.grid_vlo, cfg.grid_vhi, cfg.grid_nv};
  g.th = {-kPi, kPi, cfg.grid_nth};
  return g;
}

double config_alpha(const RunConfig& cfg) {
  if (cfg.alpha_override >= 0.0 && cfg.alpha_override < 1.0) {
    return cfg.alpha_override;
  }
  return corrected_alpha(cfg.gamma, cfg.n_closest);
}

}  // namespace calreach
