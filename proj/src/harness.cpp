#include "calreach/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "calreach/quantreg.hpp"

namespace calreach {

namespace {

const AgentRecord* find_agent(const Scenario& sc, int id) {
  for (const AgentRecord& a : sc.agents) {
    if (a.id == id) {
      return &a;
    }
  }
  return nullptr;
}

void validate_scenario(const Scenario& sc, const RunConfig& cfg) {
  if (!(sc.dt > 0.0) || !std::isfinite(sc.dt)) {
    throw std::invalid_argument("run_episode: scenario dt must be positive");
  }
  if (sc.agents.empty()) {
    throw std::invalid_argument("run_episode: scenario has no agents");
  }
  if (find_agent(sc, sc.ego_id) == nullptr) {
    throw std::invalid_argument("run_episode: ego id not among the agents");
  }
  const std::size_t T = sc.agents.front().recorded.states.size();
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    const AgentRecord& a = sc.agents[i];
    if (a.recorded.states.size() != T || a.recorded.dt != sc.dt ||
        a.recorded.t0 != sc.agents.front().recorded.t0) {
      throw std::invalid_argument(
          "run_episode: recordings must share t0, dt, and length");
    }
    for (std::size_t j = i + 1; j < sc.agents.size(); ++j) {
      if (sc.agents[j].id == a.id) {
        throw std::invalid_argument("run_episode: duplicate agent id");
      }
    }
  }
  if (sc.calib_steps < 0 || sc.eval_steps < 1) {
    throw std::invalid_argument(
        "run_episode: need calib_steps >= 0 and eval_steps >= 1");
  }
  const std::int64_t hist = static_cast<std::int64_t>(cfg.history);
  const std::int64_t h = static_cast<std::int64_t>(cfg.horizon);
  if (sc.calib_steps < hist - 1) {
    throw std::invalid_argument(
        "run_episode: calibration horizon shorter than the forecast history");
  }
  if (static_cast<std::int64_t>(T) < sc.calib_steps + sc.eval_steps + h) {
    throw std::invalid_argument(
        "run_episode: recordings shorter than calib + eval + horizon steps");
  }
  if (!std::isfinite(sc.goal_x) || !std::isfinite(sc.goal_y)) {
    throw std::invalid_argument("run_episode: goal must be finite");
  }
}

// Window center leading the agent by half the horizon so the tube fits.
std::pair<double, double> window_center(const AgentState& s, std::int64_t h,
                                        double dt) {
  const double lead = s.v * static_cast<double>(h) * dt * 0.5;
  return {s.x + lead * std::cos(s.theta), s.y + lead * std::sin(s.theta)};
}

// Drops the spread features (indices 1..3) from every step's vector.
void strip_covariance_features(Forecast& f) {
  for (UncertaintyVector& u : f.sigma) {
    for (std::size_t i = 1; i < u.sigma.size() && i <= 3; ++i) {
      u.sigma[i] = 0.0;
    }
  }
}

Control brake_control(const AgentState& z, const ControlInterval& box,
                      double fine_dt) {
  return Control{std::clamp(-z.v / fine_dt, box.lo.u1, box.hi.u1),
                 std::clamp(0.0, box.lo.u2, box.hi.u2)};
}

struct Models {
  std::map<int, QuantileBank> banks;
  std::map<int, ConformalState> conformals;
};

}  // namespace

EpisodeLog run_episode(const Scenario& sc, const RunConfig& cfg) {
  validate_config(cfg);
  validate_scenario(sc, cfg);

  const std::int64_t hist = static_cast<std::int64_t>(cfg.history);
  const std::int64_t h = static_cast<std::int64_t>(cfg.horizon);
  const std::int64_t first_issue = hist - 1;
  const std::int64_t last_issue = sc.calib_steps + sc.eval_steps - 1;
  const double dt = sc.dt;
  const double fine_dt = dt / kPlanSubsteps;
  const double alpha = config_alpha(cfg);

  const AgentRecord& ego_rec = *find_agent(sc, sc.ego_id);

  std::unique_ptr<Forecaster> model;
  if (cfg.forecaster == ForecasterKind::kConstantControl) {
    ConstantControlParams p;
    p.horizon = cfg.horizon;
    p.required_history = cfg.history;
    p.mode_offset = cfg.cc_mode_offset;
    p.var_base = cfg.cc_var_base;
    p.var_growth = cfg.cc_var_growth;
    model = std::make_unique<ConstantControlForecaster>(p);
  } else {
    OracleNoiseParams p;
    p.horizon = cfg.horizon;
    p.required_history = cfg.history;
    p.noise_std = cfg.on_noise_std;
    p.noise_growth = cfg.on_noise_growth;
    p.shift_step = cfg.on_shift_step;
    p.shift_factor = cfg.on_shift_factor;
    p.seed = cfg.seed;
    auto oracle = std::make_unique<OracleNoiseForecaster>(p);
    for (const AgentRecord& a : sc.agents) {
      if (a.id != sc.ego_id) {
        oracle->add_agent(a.id, a.recorded);
      }
    }
    model = std::move(oracle);
  }
  const std::size_t d = model->feature_dim();

  Models st;
  const auto state_key = [&](int id) { return cfg.per_agent_state ? id : -1; };
  const auto bank_of = [&](int id) -> QuantileBank& {
    auto [it, fresh] = st.banks.try_emplace(state_key(id));
    if (fresh) {
      it->second = make_quantile_bank(cfg.horizon, d, alpha, cfg.zeta);
    }
    return it->second;
  };
  const auto conformal_of = [&](int id) -> ConformalState& {
    auto [it, fresh] = st.conformals.try_emplace(state_key(id));
    if (fresh) {
      it->second.theta.assign(cfg.horizon, 0.0);
      it->second.xi = cfg.xi;
      it->second.alpha = alpha;
      it->second.mode = cfg.stretch_mode;
      it->second.c = cfg.stretch_c;
    }
    return it->second;
  };

  EpisodeLog log;
  log.scenario = sc;
  log.alpha = alpha;
  log.calibrated = !cfg.no_conformal;
  log.tubes = cfg.tubes;
  log.ego_executed.t0 = ego_rec.recorded.t0;
  log.ego_executed.dt = dt;
  // the ego replays its recording through the calibration horizon (and for
  // the whole run when tubes are off)
  const std::int64_t replay_until =
      cfg.tubes ? sc.calib_steps : sc.calib_steps + sc.eval_steps;
  log.ego_executed.states.assign(
      ego_rec.recorded.states.begin(),
      ego_rec.recorded.states.begin() + replay_until + 1);

  // matures the issue at record index idx against the recordings; updates
  // quantile and conformal state only when learn is set
  const auto mature = [&](IssueRecord& rec, bool learn) {
    for (AgentIssue& ai : rec.agents) {
      const AgentRecord& agent = *find_agent(sc, ai.agent_id);
      Trajectory window;
      window.t0 = agent.recorded.t0 + rec.t * dt;
      window.dt = dt;
      window.states.assign(agent.recorded.states.begin() + rec.t,
                           agent.recorded.states.begin() + rec.t + h + 1);
      ai.u_obs = estimate_controls(window);
      ai.miss.resize(cfg.horizon);
      for (std::size_t k = 0; k < cfg.horizon; ++k) {
        ai.miss[k] =
            inside_interval(ai.u_obs.controls[k], ai.intervals.steps[k]) ? 0
                                                                         : 1;
      }
      if (!ai.sets.empty()) {
        ai.pos_covered.resize(cfg.horizon);
        for (std::size_t k = 0; k < cfg.horizon; ++k) {
          const AgentState& truth = agent.recorded.states[rec.t + k + 1];
          ai.pos_covered[k] = point_in_set(ai.sets[k], truth.x, truth.y) ? 1
                                                                         : 0;
        }
      }
      if (learn) {
        if (!cfg.no_conformal) {
          ConformalState& cs = conformal_of(ai.agent_id);
          cs = rolling_update(cs, ai.u_obs, ai.intervals);
        }
        QuantileBank& bank = bank_of(ai.agent_id);
        for (std::size_t k = 0; k < cfg.horizon; ++k) {
          const Control& uo = ai.u_obs.controls[k];
          const Control& uh = ai.forecast.u_hat.controls[k];
          const double err[2] = {uo.u1 - uh.u1, uo.u2 - uh.u2};
          for (int dim = 0; dim < 2; ++dim) {
            for (const bool upper : {false, true}) {
              QuantileModel& m = bank.model(dim, k, upper);
              m = qr_update(m, ai.forecast.sigma[k], err[dim]);
            }
          }
        }
      }
      ai.evaluated = true;
    }
  };

  for (std::int64_t t = first_issue; t <= last_issue; ++t) {
    const AgentState& ego_now = log.ego_executed.states[t];

    // closest-N selection against the current ego position, ties by id
    std::vector<std::pair<double, int>> order;
    for (const AgentRecord& a : sc.agents) {
      if (a.id == sc.ego_id) {
        continue;
      }
      const AgentState& s = a.recorded.states[t];
      order.emplace_back(std::hypot(s.x - ego_now.x, s.y - ego_now.y), a.id);
    }
    std::sort(order.begin(), order.end());
    const std::size_t n_sel =
        std::min<std::size_t>(order.size(), cfg.n_closest);

    IssueRecord rec;
    rec.t = t;
    const bool make_sets = cfg.tubes && t >= sc.calib_steps - h;
    for (std::size_t i = 0; i < n_sel; ++i) {
      const int id = order[i].second;
      rec.selected.push_back(id);
      const AgentRecord& agent = *find_agent(sc, id);

      Trajectory past;
      past.t0 = agent.recorded.t0 + (t - hist + 1) * dt;
      past.dt = dt;
      past.states.assign(agent.recorded.states.begin() + (t - hist + 1),
                         agent.recorded.states.begin() + t + 1);

      AgentIssue ai;
      ai.agent_id = id;
      ai.forecast = model->predict(past, id);
      if (cfg.no_covariance_features) {
        strip_covariance_features(ai.forecast);
      }

      const QuantileBank& bank = bank_of(id);
      std::vector<std::array<double, 2>> e_lo(cfg.horizon);
      std::vector<std::array<double, 2>> e_hi(cfg.horizon);
      for (std::size_t k = 0; k < cfg.horizon; ++k) {
        for (int dim = 0; dim < 2; ++dim) {
          e_lo[k][dim] =
              qr_predict(bank.model(dim, k, false), ai.forecast.sigma[k]);
          e_hi[k][dim] =
              qr_predict(bank.model(dim, k, true), ai.forecast.sigma[k]);
        }
      }
      ai.intervals = calibrated_interval(ai.forecast.u_hat, e_lo, e_hi,
                                         conformal_of(id));

      if (make_sets) {
        const AgentState& now = agent.recorded.states[t];
        const auto [cx, cy] = window_center(now, h, dt);
        const Grid4 grid = config_grid(cfg, cx, cy);
        ai.sets = generate_tubes(now, ai.intervals, grid, dt);
        ai.areas.reserve(ai.sets.size());
        for (const SpatialSet& s : ai.sets) {
          ai.areas.push_back(set_area(s));
        }
      }
      rec.agents.push_back(std::move(ai));
    }
    log.issues.push_back(std::move(rec));

    // score and learn from the issue that just matured
    const std::int64_t s = t - h;
    if (s >= first_issue) {
      mature(log.issues[s - first_issue], true);
    }
    IssueRecord& current = log.issues.back();
    for (const auto& [key, cs] : st.conformals) {
      current.theta_after[key] = cs.theta;
    }

    // plan and step the ego through the evaluation window
    if (cfg.tubes && t >= sc.calib_steps) {
      const AgentState ego = log.ego_executed.states[t];
      ObstacleSchedule sched;
      sched.steps.assign(cfg.horizon, {});
      const double inflation = cfg.r_ego + cfg.r_agent;
      for (const AgentIssue& ai : current.agents) {
        for (std::size_t k = 0; k < ai.sets.size(); ++k) {
          sched.steps[k].push_back(inflate_set(ai.sets[k], inflation));
        }
      }

      PlanRecord pr;
      pr.t = t;
      pr.target_x = sc.goal_x;
      pr.target_y = sc.goal_y;
      const auto [ex, ey] = window_center(ego, h, dt);
      const Grid4 ego_grid = config_grid(cfg, ex, ey);
      std::vector<ValueGrid> snaps;
      try {
        snaps = reach_avoid_tube(ego, sched, cfg.ego_box, ego_grid, dt);
      } catch (const std::exception&) {
        // no tube from here (inside an inflated obstacle, or the ego left
        // the window's speed range): emergency brake
        pr.braked = true;
      }
      if (!pr.braked) {
        pr.plan = extract_plan(snaps, ego, sc.goal_x, sc.goal_y, cfg.goal_tol,
                               sched, cfg.ego_box, dt);
        if (!pr.plan.target_reached) {
          try {
            const auto [fx, fy] = fallback_target(snaps, sc.goal_x, sc.goal_y);
            pr.target_x = fx;
            pr.target_y = fy;
            pr.used_fallback = true;
            const double cell = std::hypot(ego_grid.dx(), ego_grid.dy());
            pr.plan = extract_plan(snaps, ego, fx, fy, cell, sched,
                                   cfg.ego_box, dt);
          } catch (const std::runtime_error&) {
            pr.braked = true;  // trapped: the final tube is empty
          }
        }
      }
      const bool executable = !pr.braked && pr.plan.feasible &&
                              !pr.plan.controls.controls.empty();
      AgentState z = ego;
      for (int i = 0; i < kPlanSubsteps; ++i) {
        const Control u = executable ? pr.plan.controls.controls[i]
                                     : brake_control(z, cfg.ego_box, fine_dt);
        z = dubins_step(z, u, fine_dt);
      }
      if (!executable) {
        pr.braked = true;  // covers infeasible and zero-length plans
      }
      log.ego_executed.states.push_back(z);
      log.plans.push_back(std::move(pr));
    }
  }

  // issues too close to the end of the loop mature against the recordings
  // without further learning
  for (IssueRecord& rec : log.issues) {
    if (!rec.agents.empty() && !rec.agents.front().evaluated) {
      mature(rec, false);
    }
  }
  return log;
}

double coverage_rate(const EpisodeLog& log, int k) {
  if (k < 1) {
    throw std::invalid_argument("coverage_rate: offset must be >= 1");
  }
  std::size_t count = 0;
  std::size_t hits = 0;
  for (const IssueRecord& rec : log.issues) {
    if (rec.agents.empty()) {
      continue;
    }
    bool usable = true;
    bool all_covered = true;
    for (const AgentIssue& ai : rec.agents) {
      if (!ai.evaluated ||
          ai.pos_covered.size() < static_cast<std::size_t>(k)) {
        usable = false;
        break;
      }
      all_covered = all_covered && ai.pos_covered[k - 1] != 0;
    }
    if (usable) {
      ++count;
      hits += all_covered ? 1 : 0;
    }
  }
  if (count == 0) {
    throw std::invalid_argument(
        "coverage_rate: no matured occupancy sets at this offset");
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

double interval_coverage(const EpisodeLog& log, int k) {
  if (k < 1) {
    throw std::invalid_argument("interval_coverage: offset must be >= 1");
  }
  std::size_t count = 0;
  std::size_t hits = 0;
  for (const IssueRecord& rec : log.issues) {
    for (const AgentIssue& ai : rec.agents) {
      if (!ai.evaluated || ai.miss.size() < static_cast<std::size_t>(k)) {
        continue;
      }
      ++count;
      hits += ai.miss[k - 1] ? 0 : 1;
    }
  }
  if (count == 0) {
    throw std::invalid_argument(
        "interval_coverage: no matured intervals at this offset");
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

std::optional<double> conservatism(const EpisodeLog& log) {
  const Scenario& sc = log.scenario;
  const AgentRecord* ego = find_agent(sc, sc.ego_id);
  if (ego == nullptr) {
    throw std::invalid_argument("conservatism: ego recording missing");
  }
  double min_planned = std::numeric_limits<double>::infinity();
  double min_recorded = std::numeric_limits<double>::infinity();
  const std::int64_t from = sc.calib_steps;
  const std::int64_t to = sc.calib_steps + sc.eval_steps;
  for (std::int64_t i = from; i <= to; ++i) {
    if (i < 0 ||
        i >= static_cast<std::int64_t>(log.ego_executed.states.size())) {
      continue;
    }
    const AgentState& planned = log.ego_executed.states[i];
    for (const AgentRecord& a : sc.agents) {
      if (a.id == sc.ego_id ||
          i >= static_cast<std::int64_t>(a.recorded.states.size())) {
        continue;
      }
      const AgentState& other = a.recorded.states[i];
      min_planned = std::min(
          min_planned, std::hypot(planned.x - other.x, planned.y - other.y));
      if (i < static_cast<std::int64_t>(ego->recorded.states.size())) {
        const AgentState& truth = ego->recorded.states[i];
        min_recorded = std::min(
            min_recorded, std::hypot(truth.x - other.x, truth.y - other.y));
      }
    }
  }
  if (!std::isfinite(min_recorded) || min_recorded == 0.0) {
    return std::nullopt;
  }
  return min_planned / min_recorded;
}

double progress(const EpisodeLog& log) {
  const Scenario& sc = log.scenario;
  const std::int64_t start = sc.calib_steps;
  if (start < 0 ||
      start >= static_cast<std::int64_t>(log.ego_executed.states.size())) {
    throw std::invalid_argument("progress: no evaluation start state");
  }
  const AgentState& xs = log.ego_executed.states[start];
  const AgentState& xf = log.ego_executed.states.back();
  const double d0 = std::hypot(sc.goal_x - xs.x, sc.goal_y - xs.y);
  if (d0 == 0.0) {
    throw std::invalid_argument("progress: start coincides with the goal");
  }
  return 1.0 - std::hypot(sc.goal_x - xf.x, sc.goal_y - xf.y) / d0;
}

bool collision_check(const EpisodeLog& log, double radius) {
  const Scenario& sc = log.scenario;
  const std::int64_t from = sc.calib_steps;
  const std::int64_t to = sc.calib_steps + sc.eval_steps;
  for (std::int64_t i = from; i <= to; ++i) {
    if (i < 0 ||
        i >= static_cast<std::int64_t>(log.ego_executed.states.size())) {
      continue;
    }
    const AgentState& planned = log.ego_executed.states[i];
    for (const AgentRecord& a : sc.agents) {
      if (a.id == sc.ego_id ||
          i >= static_cast<std::int64_t>(a.recorded.states.size())) {
        continue;
      }
      const AgentState& other = a.recorded.states[i];
      if (std::hypot(planned.x - other.x, planned.y - other.y) <= radius) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace calreach
