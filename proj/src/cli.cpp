#include "calreach/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace calreach {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) {
    return "";
  }
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config: " + key + " " + why);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) {
      return d;
    }
  } catch (const std::exception&) {
  }
  bad_value(key, "has a malformed numeric value '" + v + "'");
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t d = std::stoll(v, &pos);
    if (pos == v.size()) {
      return d;
    }
  } catch (const std::exception&) {
  }
  bad_value(key, "has a malformed integer value '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::int64_t d = to_int(key, v);
  if (d < 0) {
    bad_value(key, "must be nonnegative");
  }
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  bad_value(key, "expects true/false, got '" + v + "'");
}

void apply_pair(RunConfig& cfg, const std::string& key,
                const std::string& value) {
  if (key == "gamma") {
    cfg.gamma = to_double(key, value);
  } else if (key == "n_closest") {
    cfg.n_closest = static_cast<int>(to_int(key, value));
  } else if (key == "xi") {
    cfg.xi = to_double(key, value);
  } else if (key == "zeta") {
    cfg.zeta = to_double(key, value);
  } else if (key == "stretch_mode") {
    if (value == "linear") {
      cfg.stretch_mode = StretchMode::kLinear;
    } else if (value == "exp") {
      cfg.stretch_mode = StretchMode::kExponential;
    } else {
      bad_value(key, "expects linear or exp, got '" + value + "'");
    }
  } else if (key == "stretch_c") {
    cfg.stretch_c = to_double(key, value);
  } else if (key == "forecaster") {
    if (value == "constant_control") {
      cfg.forecaster = ForecasterKind::kConstantControl;
    } else if (value == "oracle_noise") {
      cfg.forecaster = ForecasterKind::kOracleNoise;
    } else {
      bad_value(key, "expects constant_control or oracle_noise, got '" +
                         value + "'");
    }
  } else if (key == "horizon") {
    cfg.horizon = to_uint(key, value);
  } else if (key == "history") {
    cfg.history = to_uint(key, value);
  } else if (key == "dt") {
    cfg.dt = to_double(key, value);
  } else if (key == "cc_mode_offset_u1") {
    cfg.cc_mode_offset.u1 = to_double(key, value);
  } else if (key == "cc_mode_offset_u2") {
    cfg.cc_mode_offset.u2 = to_double(key, value);
  } else if (key == "cc_var_base") {
    cfg.cc_var_base = to_double(key, value);
  } else if (key == "cc_var_growth") {
    cfg.cc_var_growth = to_double(key, value);
  } else if (key == "on_noise_std") {
    cfg.on_noise_std = to_double(key, value);
  } else if (key == "on_noise_growth") {
    cfg.on_noise_growth = to_double(key, value);
  } else if (key == "on_shift_step") {
    cfg.on_shift_step = to_int(key, value);
  } else if (key == "on_shift_factor") {
    cfg.on_shift_factor = to_double(key, value);
  } else if (key == "grid_extent") {
    cfg.grid_extent = to_double(key, value);
  } else if (key == "grid_nxy") {
    cfg.grid_nxy = static_cast<int>(to_int(key, value));
  } else if (key == "grid_vlo") {
    cfg.grid_vlo = to_double(key, value);
  } else if (key == "grid_vhi") {
    cfg.grid_vhi = to_double(key, value);
  } else if (key == "grid_nv") {
    cfg.grid_nv = static_cast<int>(to_int(key, value));
  } else if (key == "grid_nth") {
    cfg.grid_nth = static_cast<int>(to_int(key, value));
  } else if (key == "ego_u1_lo") {
    cfg.ego_box.lo.u1 = to_double(key, value);
  } else if (key == "ego_u1_hi") {
    cfg.ego_box.hi.u1 = to_double(key, value);
  } else if (key == "ego_u2_lo") {
    cfg.ego_box.lo.u2 = to_double(key, value);
  } else if (key == "ego_u2_hi") {
    cfg.ego_box.hi.u2 = to_double(key, value);
  } else if (key == "r_ego") {
    cfg.r_ego = to_double(key, value);
  } else if (key == "r_agent") {
    cfg.r_agent = to_double(key, value);
  } else if (key == "goal_tol") {
    cfg.goal_tol = to_double(key, value);
  } else if (key == "no_conformal") {
    cfg.no_conformal = to_bool(key, value);
  } else if (key == "no_covariance_features") {
    cfg.no_covariance_features = to_bool(key, value);
  } else if (key == "per_agent_state") {
    cfg.per_agent_state = to_bool(key, value);
  } else if (key == "tubes") {
    cfg.tubes = to_bool(key, value);
  } else if (key == "alpha_override") {
    cfg.alpha_override = to_double(key, value);
  } else if (key == "seed") {
    cfg.seed = to_uint(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void apply_line(RunConfig& cfg, const std::string& raw) {
  std::string line = raw;
  const std::size_t hash = line.find('#');
  if (hash != std::string::npos) {
    line.resize(hash);
  }
  line = trim(line);
  if (line.empty()) {
    return;
  }
  const std::size_t eq = line.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config: expected key=value, got '" + line +
                                "'");
  }
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  if (key.empty()) {
    throw std::invalid_argument("config: empty key in '" + line + "'");
  }
  apply_pair(cfg, key, value);
}

void apply_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    apply_line(cfg, line);
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

// Standard error of the mean; 0 for a single sample.
double se_of(const std::vector<double>& v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) {
    acc += (x - m) * (x - m);
  }
  const double sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

Trajectory drive(const AgentState& s0, const Control& u, std::size_t n,
                 double dt) {
  ControlSequence seq;
  seq.t0 = 0.0;
  seq.dt = dt;
  seq.controls.assign(n, u);
  return rollout(s0, seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Two straight drivers meeting at a right angle; the layout is anchored at
// the start of the evaluation window, so the replayed lead-in is backed out
// of the start positions.
Scenario intersection_scene(std::mt19937_64& rng) {
  Scenario sc;
  sc.dt = 0.5;
  sc.ego_id = 0;
  sc.calib_steps = 8;
  sc.eval_steps = 14;
  const std::size_t n = 28;  // calib + eval + forecast margin 6
  const double lead = static_cast<double>(sc.calib_steps) * sc.dt;
  const double ve = 8.0 + uniform(rng, -0.5, 0.5);
  const double va = 8.0 + uniform(rng, -0.5, 0.5);
  const double ego_lane = uniform(rng, -1.0, 1.0);
  const double agent_lane = uniform(rng, -1.0, 1.0);
  sc.goal_x = ego_lane;
  sc.goal_y = 25.0;
  sc.agents.push_back(
      {0, drive({ego_lane, -20.0 - ve * lead, ve, std::numbers::pi / 2},
                {0.0, 0.0}, n, sc.dt)});
  sc.agents.push_back(
      {1, drive({-25.0 - va * lead, agent_lane, va, 0.0}, {0.0, 0.0}, n,
                sc.dt)});
  return sc;
}

// Head-on pass in adjacent lanes; the recorded ego shaves the oncoming car.
Scenario corridor_scene(std::mt19937_64& rng) {
  Scenario sc;
  sc.dt = 0.5;
  sc.ego_id = 0;
  sc.calib_steps = 8;
  sc.eval_steps = 14;
  const std::size_t n = 28;
  const double lead = static_cast<double>(sc.calib_steps) * sc.dt;
  const double ve = 6.0 + uniform(rng, -0.5, 0.5);
  const double va = 6.0 + uniform(rng, -0.5, 0.5);
  const double lane = 1.5 + uniform(rng, -0.3, 0.3);
  sc.goal_x = 25.0;
  sc.goal_y = 0.0;
  sc.agents.push_back(
      {0, drive({-20.0 - ve * lead, 0.0, ve, 0.0}, {0.0, 0.0}, n, sc.dt)});
  sc.agents.push_back(
      {1, drive({25.0 + va * lead, lane, va, std::numbers::pi}, {0.0, 0.0},
                n, sc.dt)});
  return sc;
}

// Five agents on random constant-control arcs; accelerations are biased
// upward so speeds stay inside the default grid.
Scenario random_turn_scene(std::mt19937_64& rng) {
  Scenario sc;
  sc.dt = 0.5;
  sc.ego_id = 0;
  sc.calib_steps = 8;
  sc.eval_steps = 10;
  const std::size_t n = 24;
  const double pi = std::numbers::pi;
  sc.goal_x = uniform(rng, -15.0, 15.0);
  sc.goal_y = uniform(rng, -15.0, 15.0);
  sc.agents.push_back({0, drive({uniform(rng, -5.0, 5.0),
                                 uniform(rng, -5.0, 5.0),
                                 uniform(rng, 2.0, 5.0),
                                 uniform(rng, -pi, pi)},
                                {0.0, 0.0}, n, sc.dt)});
  for (int id = 1; id <= 4; ++id) {
    const AgentState s0{uniform(rng, -20.0, 20.0), uniform(rng, -20.0, 20.0),
                        uniform(rng, 1.0, 5.0), uniform(rng, -pi, pi)};
    const Control u{uniform(rng, -0.05, 0.25), uniform(rng, -0.4, 0.4)};
    sc.agents.push_back({id, drive(s0, u, n, sc.dt)});
  }
  return sc;
}

// Long scene for calibration experiments: a parked ego plus three wandering
// agents with mean-reverting speed, sized for 2000 evaluated steps.
Scenario shifting_noise_scene(std::mt19937_64& rng) {
  Scenario sc;
  sc.dt = 0.5;
  sc.ego_id = 0;
  sc.calib_steps = 300;
  sc.eval_steps = 2000;
  const std::size_t n = 2306;
  const double pi = std::numbers::pi;
  sc.goal_x = 110.0;
  sc.goal_y = 100.0;
  sc.agents.push_back(
      {0, drive({100.0, 100.0, 0.0, 0.0}, {0.0, 0.0}, n, sc.dt)});
  for (int id = 1; id <= 3; ++id) {
    AgentState z{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0),
                 uniform(rng, 3.0, 6.0), uniform(rng, -pi, pi)};
    Trajectory tr;
    tr.t0 = 0.0;
    tr.dt = sc.dt;
    tr.states.push_back(z);
    for (std::size_t i = 0; i < n; ++i) {
      const Control u{-0.05 * (z.v - 5.0) + uniform(rng, -0.3, 0.3),
                      uniform(rng, -0.5, 0.5)};
      z = dubins_step(z, u, sc.dt);
      tr.states.push_back(z);
    }
    sc.agents.push_back({id, std::move(tr)});
  }
  return sc;
}

json states_json(const Trajectory& tr) {
  json rows = json::array();
  for (const AgentState& s : tr.states) {
    rows.push_back({s.x, s.y, s.v, s.theta});
  }
  return rows;
}

double num_at(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw std::invalid_argument(std::string("scenario: missing numeric '") +
                                key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  return parse_config(text, {});
}

RunConfig parse_config(const std::string& file_text,
                       const std::vector<std::string>& overrides) {
  RunConfig cfg;
  apply_text(cfg, file_text);
  for (const std::string& ov : overrides) {
    apply_line(cfg, ov);
  }
  validate_config(cfg);
  return cfg;
}

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["dt"] = sc.dt;
  j["ego_id"] = sc.ego_id;
  j["goal"] = {sc.goal_x, sc.goal_y};
  j["calib_steps"] = sc.calib_steps;
  j["eval_steps"] = sc.eval_steps;
  json agents = json::array();
  for (const AgentRecord& a : sc.agents) {
    json ja;
    ja["id"] = a.id;
    ja["states"] = states_json(a.recorded);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  Scenario sc;
  sc.dt = num_at(j, "dt");
  if (!j.contains("ego_id") || !j.at("ego_id").is_number_integer()) {
    throw std::invalid_argument("scenario: missing integer 'ego_id'");
  }
  sc.ego_id = j.at("ego_id").get<int>();
  if (!j.contains("goal") || !j.at("goal").is_array() ||
      j.at("goal").size() != 2) {
    throw std::invalid_argument("scenario: 'goal' must be [x, y]");
  }
  sc.goal_x = j.at("goal")[0].get<double>();
  sc.goal_y = j.at("goal")[1].get<double>();
  sc.calib_steps = static_cast<std::int64_t>(num_at(j, "calib_steps"));
  sc.eval_steps = static_cast<std::int64_t>(num_at(j, "eval_steps"));
  if (!j.contains("agents") || !j.at("agents").is_array()) {
    throw std::invalid_argument("scenario: missing 'agents' array");
  }
  for (const json& ja : j.at("agents")) {
    AgentRecord rec;
    if (!ja.contains("id") || !ja.at("id").is_number_integer()) {
      throw std::invalid_argument("scenario: agent missing integer 'id'");
    }
    rec.id = ja.at("id").get<int>();
    rec.recorded.t0 = 0.0;
    rec.recorded.dt = sc.dt;
    if (!ja.contains("states") || !ja.at("states").is_array()) {
      throw std::invalid_argument("scenario: agent missing 'states' array");
    }
    for (const json& row : ja.at("states")) {
      if (!row.is_array() || row.size() != 4) {
        throw std::invalid_argument(
            "scenario: each state must be [x, y, v, theta]");
      }
      rec.recorded.states.push_back({row[0].get<double>(),
                                     row[1].get<double>(),
                                     row[2].get<double>(),
                                     row[3].get<double>()});
    }
    sc.agents.push_back(std::move(rec));
  }
  return sc;
}

ScenarioFamily family_from_name(const std::string& name) {
  if (name == "intersection") {
    return ScenarioFamily::kIntersection;
  }
  if (name == "corridor") {
    return ScenarioFamily::kCorridor;
  }
  if (name == "random-constant-turn") {
    return ScenarioFamily::kRandomConstantTurn;
  }
  if (name == "shifting-noise") {
    return ScenarioFamily::kShiftingNoise;
  }
  throw std::invalid_argument("unknown scenario family '" + name + "'");
}

std::vector<Scenario> generate_scenarios(ScenarioFamily family, int count,
                                         std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("generate_scenarios: count must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    switch (family) {
      case ScenarioFamily::kIntersection:
        out.push_back(intersection_scene(rng));
        break;
      case ScenarioFamily::kCorridor:
        out.push_back(corridor_scene(rng));
        break;
      case ScenarioFamily::kRandomConstantTurn:
        out.push_back(random_turn_scene(rng));
        break;
      case ScenarioFamily::kShiftingNoise:
        out.push_back(shifting_noise_scene(rng));
        break;
    }
  }
  return out;
}

BatchResult run_batch(const RunConfig& cfg,
                      const std::vector<std::pair<std::string, Scenario>>&
                          scenes) {
  if (scenes.empty()) {
    throw std::invalid_argument("run_batch: no scenarios given");
  }
  BatchResult br;
  for (const auto& [name, sc] : scenes) {
    EpisodeOutcome out;
    out.scene = name;
    try {
      out.log = run_episode(sc, cfg);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
      out.log = EpisodeLog{};
    }
    br.episodes.push_back(std::move(out));
  }

  std::string cov = "step,coverage_mean,coverage_se,area_mean,area_se\n";
  for (int k = 1; k <= static_cast<int>(cfg.horizon); ++k) {
    std::vector<double> covs;
    std::vector<double> areas;
    for (const EpisodeOutcome& ep : br.episodes) {
      if (ep.failed) {
        continue;
      }
      try {
        covs.push_back(cfg.tubes ? coverage_rate(ep.log, k)
                                 : interval_coverage(ep.log, k));
      } catch (const std::exception&) {
      }
      if (cfg.tubes) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const IssueRecord& rec : ep.log.issues) {
          for (const AgentIssue& ai : rec.agents) {
            if (ai.areas.size() >= static_cast<std::size_t>(k)) {
              acc += ai.areas[k - 1];
              ++n;
            }
          }
        }
        if (n > 0) {
          areas.push_back(acc / static_cast<double>(n));
        }
      }
    }
    cov += std::to_string(k);
    cov += covs.empty() ? ",na,na" : "," + fmt6(mean_of(covs)) + "," +
                                         fmt6(se_of(covs));
    cov += areas.empty() ? ",na,na" : "," + fmt6(mean_of(areas)) + "," +
                                          fmt6(se_of(areas));
    cov += "\n";
  }
  br.coverage_csv = std::move(cov);

  std::string pl = "scene,progress,collision,conservatism,calibrated\n";
  const double radius = cfg.r_ego + cfg.r_agent;
  for (const EpisodeOutcome& ep : br.episodes) {
    pl += ep.scene;
    if (ep.failed) {
      pl += ",na,na,na";
    } else {
      try {
        pl += "," + fmt6(progress(ep.log));
      } catch (const std::exception&) {
        pl += ",na";
      }
      pl += collision_check(ep.log, radius) ? ",1" : ",0";
      const auto cons = conservatism(ep.log);
      pl += cons.has_value() ? "," + fmt6(*cons) : ",na";
    }
    pl += cfg.no_conformal ? ",false" : ",true";
    pl += "\n";
  }
  br.planning_csv = std::move(pl);
  return br;
}

std::string episode_to_json(const EpisodeOutcome& outcome) {
  json j;
  j["scene"] = outcome.scene;
  j["failed"] = outcome.failed;
  if (outcome.failed) {
    j["error"] = outcome.error;
    return j.dump(2) + "\n";
  }
  const EpisodeLog& log = outcome.log;
  j["alpha"] = log.alpha;
  j["calibrated"] = log.calibrated;
  j["tubes"] = log.tubes;
  j["issues"] = log.issues.size();
  j["plans"] = log.plans.size();
  std::size_t braked = 0;
  std::size_t fallback = 0;
  for (const PlanRecord& pr : log.plans) {
    braked += pr.braked ? 1 : 0;
    fallback += pr.used_fallback ? 1 : 0;
  }
  j["braked"] = braked;
  j["used_fallback"] = fallback;

  std::size_t h = 0;
  for (const IssueRecord& rec : log.issues) {
    for (const AgentIssue& ai : rec.agents) {
      h = std::max(h, ai.miss.size());
    }
  }
  json icov = json::array();
  json scov = json::array();
  json marea = json::array();
  for (int k = 1; k <= static_cast<int>(h); ++k) {
    try {
      icov.push_back(interval_coverage(log, k));
    } catch (const std::exception&) {
      icov.push_back(nullptr);
    }
    try {
      scov.push_back(coverage_rate(log, k));
    } catch (const std::exception&) {
      scov.push_back(nullptr);
    }
    double acc = 0.0;
    std::size_t n = 0;
    for (const IssueRecord& rec : log.issues) {
      for (const AgentIssue& ai : rec.agents) {
        if (ai.areas.size() >= static_cast<std::size_t>(k)) {
          acc += ai.areas[k - 1];
          ++n;
        }
      }
    }
    if (n > 0) {
      marea.push_back(acc / static_cast<double>(n));
    } else {
      marea.push_back(nullptr);
    }
  }
  j["interval_coverage"] = std::move(icov);
  j["set_coverage"] = std::move(scov);
  j["mean_area"] = std::move(marea);

  try {
    j["progress"] = progress(log);
  } catch (const std::exception&) {
    j["progress"] = nullptr;
  }
  const auto cons = conservatism(log);
  if (cons.has_value()) {
    j["conservatism"] = *cons;
  } else {
    j["conservatism"] = nullptr;
  }
  return j.dump(2) + "\n";
}

namespace {

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
};

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string render_scene(const EpisodeLog& log, std::int64_t t) {
  const IssueRecord* rec = nullptr;
  for (const IssueRecord& r : log.issues) {
    if (r.t == t) {
      rec = &r;
      break;
    }
  }
  if (rec == nullptr) {
    throw std::invalid_argument("render_scene: no issue at that timestep");
  }
  const Scenario& sc = log.scenario;
  const PlanRecord* plan = nullptr;
  for (const PlanRecord& p : log.plans) {
    if (p.t == t) {
      plan = &p;
      break;
    }
  }

  Bounds bb;
  bb.add(sc.goal_x, sc.goal_y);
  for (const AgentRecord& a : sc.agents) {
    if (t >= 0 && t < static_cast<std::int64_t>(a.recorded.states.size())) {
      bb.add(a.recorded.states[t].x, a.recorded.states[t].y);
    }
  }
  if (t >= 0 &&
      t < static_cast<std::int64_t>(log.ego_executed.states.size())) {
    bb.add(log.ego_executed.states[t].x, log.ego_executed.states[t].y);
  }
  for (const AgentIssue& ai : rec->agents) {
    for (const SpatialSet& s : ai.sets) {
      for (int ix = 0; ix < s.nx; ++ix) {
        for (int iy = 0; iy < s.ny; ++iy) {
          if (s.mask[static_cast<std::size_t>(ix) *
                         static_cast<std::size_t>(s.ny) +
                     static_cast<std::size_t>(iy)]) {
            bb.add(s.x0 + ix * s.dx, s.y0 + iy * s.dy);
          }
        }
      }
    }
  }
  if (plan != nullptr) {
    for (const AgentState& s : plan->plan.trajectory.states) {
      bb.add(s.x, s.y);
    }
  }

  const double pad = 3.0;
  const double min_x = bb.min_x - pad;
  const double max_x = bb.max_x + pad;
  const double min_y = bb.min_y - pad;
  const double max_y = bb.max_y + pad;
  const double w = max_x - min_x;
  const double hgt = max_y - min_y;
  const double scale = 900.0 / std::max(w, hgt);
  const double W = w * scale;
  const double H = hgt * scale;
  const auto X = [&](double x) { return (x - min_x) * scale; };
  const auto Y = [&](double y) { return (max_y - y) * scale; };
  const double unit = scale;  // 1 m in pixels

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " +
         fmt3(W) + " " + fmt3(H) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt3(W) + "\" height=\"" +
         fmt3(H) + "\" fill=\"#ffffff\"/>\n";

  // later steps first so earlier (redder) steps land on top
  for (const AgentIssue& ai : rec->agents) {
    const std::size_t n_steps = ai.sets.size();
    for (std::size_t kk = n_steps; kk-- > 0;) {
      const SpatialSet& s = ai.sets[kk];
      const double frac =
          n_steps > 1
              ? static_cast<double>(kk) / static_cast<double>(n_steps - 1)
              : 0.0;
      const int g = 60 + static_cast<int>(std::lround(155.0 * frac));
      const std::string fill =
          "rgb(230," + std::to_string(g) + "," + std::to_string(g) + ")";
      // merge vertical runs of covered cells into one rect per run
      for (int ix = 0; ix < s.nx; ++ix) {
        int iy = 0;
        while (iy < s.ny) {
          const std::size_t base = static_cast<std::size_t>(ix) *
                                   static_cast<std::size_t>(s.ny);
          if (!s.mask[base + static_cast<std::size_t>(iy)]) {
            ++iy;
            continue;
          }
          int run = iy;
          while (run < s.ny && s.mask[base + static_cast<std::size_t>(run)]) {
            ++run;
          }
          const double x_lo = s.x0 + ix * s.dx - s.dx / 2;
          const double y_hi = s.y0 + (run - 1) * s.dy + s.dy / 2;
          svg += "<rect x=\"" + fmt3(X(x_lo)) + "\" y=\"" + fmt3(Y(y_hi)) +
                 "\" width=\"" + fmt3(s.dx * scale) + "\" height=\"" +
                 fmt3((run - iy) * s.dy * scale) + "\" fill=\"" + fill +
                 "\" fill-opacity=\"0.85\"/>\n";
          iy = run;
        }
      }
    }
  }

  if (plan != nullptr && plan->plan.trajectory.states.size() > 1) {
    std::string pts;
    for (const AgentState& s : plan->plan.trajectory.states) {
      if (!pts.empty()) {
        pts += " ";
      }
      pts += fmt3(X(s.x)) + "," + fmt3(Y(s.y));
    }
    svg += "<polyline points=\"" + pts +
           "\" fill=\"none\" stroke=\"#822727\" stroke-width=\"" +
           fmt3(0.3 * unit) + "\"/>\n";
  }

  for (const AgentRecord& a : sc.agents) {
    if (a.id == sc.ego_id || t < 0 ||
        t >= static_cast<std::int64_t>(a.recorded.states.size())) {
      continue;
    }
    const AgentState& s = a.recorded.states[t];
    svg += "<circle cx=\"" + fmt3(X(s.x)) + "\" cy=\"" + fmt3(Y(s.y)) +
           "\" r=\"" + fmt3(1.0 * unit) + "\" fill=\"#2b6cb0\"/>\n";
  }
  if (t >= 0 &&
      t < static_cast<std::int64_t>(log.ego_executed.states.size())) {
    const AgentState& s = log.ego_executed.states[t];
    svg += "<circle cx=\"" + fmt3(X(s.x)) + "\" cy=\"" + fmt3(Y(s.y)) +
           "\" r=\"" + fmt3(1.0 * unit) + "\" fill=\"#c53030\"/>\n";
  }

  // ten-vertex star goal marker
  {
    std::string pts;
    for (int i = 0; i < 10; ++i) {
      const double ang =
          -std::numbers::pi / 2 + i * std::numbers::pi / 5.0;
      const double r = (i % 2 == 0) ? 1.6 : 0.65;
      const double gx = sc.goal_x + r * std::cos(ang);
      const double gy = sc.goal_y + r * std::sin(ang);
      if (!pts.empty()) {
        pts += " ";
      }
      pts += fmt3(X(gx)) + "," + fmt3(Y(gy));
    }
    svg += "<polygon points=\"" + pts + "\" fill=\"#d53f8c\"/>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace calreach
