#include "calreach/forecaster.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace calreach {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-(agent, time) stream key; independent of call order.
std::uint64_t stream_seed(std::uint64_t seed, int agent_id,
                          std::int64_t t_idx) {
  std::uint64_t s = splitmix(seed);
  s = splitmix(s ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(agent_id)));
  s = splitmix(s ^ static_cast<std::uint64_t>(t_idx));
  return s;
}

// Box-Muller, cosine branch only; pinned here so outputs never depend on the
// standard library's normal_distribution.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
  double next() {
    const double a = 1.0 - unit();  // (0, 1]
    const double b = unit();
    return std::sqrt(-2.0 * std::log(a)) * std::cos(kTwoPi * b);
  }

 private:
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
};

void check_history(const Trajectory& history, std::size_t required) {
  if (history.states.size() < required) {
    throw std::invalid_argument("predict: history shorter than the forecaster's required context");
  }
}

}  // namespace

ControlSequence estimate_controls(const Trajectory& history) {
  if (history.states.size() < 2) {
    throw std::invalid_argument("estimate_controls: history needs at least 2 states");
  }
  if (!(history.dt > 0.0)) {
    throw std::invalid_argument("estimate_controls: history dt must be positive");
  }
  ControlSequence seq;
  seq.t0 = history.t0;
  seq.dt = history.dt;
  seq.controls.reserve(history.states.size() - 1);
  for (std::size_t k = 0; k + 1 < history.states.size(); ++k) {
    const AgentState& a = history.states[k];
    const AgentState& b = history.states[k + 1];
    seq.controls.push_back(Control{(b.v - a.v) / history.dt,
                                   wrap_angle(b.theta - a.theta) / history.dt});
  }
  return seq;
}

UncertaintyVector gmm_uncertainty_features(const GmmForecast& g,
                                           std::size_t step) {
  if (step >= g.steps.size()) {
    throw std::invalid_argument("gmm_uncertainty_features: step out of range");
  }
  const auto& modes = g.steps[step].modes;
  if (modes.empty()) {
    throw std::invalid_argument("gmm_uncertainty_features: no modes");
  }
  double wsum = 0.0;
  for (const GmmMode& m : modes) {
    if (m.weight < 0.0) {
      throw std::invalid_argument("gmm_uncertainty_features: negative weight");
    }
    wsum += m.weight;
    if (std::fabs(m.cov[0][1] - m.cov[1][0]) > 1e-9) {
      throw std::invalid_argument("gmm_uncertainty_features: asymmetric covariance");
    }
    // 2x2 symmetric eigenvalue check
    const double tr = m.cov[0][0] + m.cov[1][1];
    const double det = m.cov[0][0] * m.cov[1][1] - m.cov[0][1] * m.cov[1][0];
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double lam_min = 0.5 * (tr - disc);
    if (lam_min < -1e-9) {
      throw std::invalid_argument("gmm_uncertainty_features: covariance not PSD");
    }
  }
  if (std::fabs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("gmm_uncertainty_features: weights must sum to 1");
  }

  std::size_t top = 0;
  for (std::size_t i = 1; i < modes.size(); ++i) {
    if (modes[i].weight > modes[top].weight) {
      top = i;
    }
  }
  double max_dist = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      const double d1 = modes[i].mean.u1 - modes[j].mean.u1;
      const double d2 = modes[i].mean.u2 - modes[j].mean.u2;
      max_dist = std::max(max_dist, std::sqrt(d1 * d1 + d2 * d2));
    }
  }
  double entropy = 0.0;
  for (const GmmMode& m : modes) {
    if (m.weight > 0.0) {
      entropy -= m.weight * std::log(m.weight);
    }
  }
  const GmmMode& t = modes[top];
  UncertaintyVector u;
  u.sigma = {1.0,
             std::sqrt(std::max(0.0, t.cov[0][0])),
             std::sqrt(std::max(0.0, t.cov[1][1])),
             std::fabs(t.cov[0][1]),
             max_dist,
             entropy};
  return u;
}

Forecast predict(const Trajectory& history, const Forecaster& model,
                 int agent_id) {
  return model.predict(history, agent_id);
}

ConstantControlForecaster::ConstantControlForecaster(ConstantControlParams p)
    : p_(p) {
  if (p_.horizon == 0 || p_.required_history < 2) {
    throw std::invalid_argument("ConstantControlForecaster: horizon >= 1 and history >= 2 required");
  }
}

Forecast ConstantControlForecaster::predict(const Trajectory& history,
                                            int /*agent_id*/) const {
  check_history(history, p_.required_history);
  const ControlSequence est = estimate_controls(history);
  const std::size_t n = est.controls.size();
  Control mean = est.controls[n - 1];
  if (n >= 2) {
    mean.u1 = 0.5 * (mean.u1 + est.controls[n - 2].u1);
    mean.u2 = 0.5 * (mean.u2 + est.controls[n - 2].u2);
  }

  Forecast f;
  f.u_hat.t0 = history.t0 + history.dt * static_cast<double>(history.states.size() - 1);
  f.u_hat.dt = history.dt;
  f.u_hat.controls.assign(p_.horizon, mean);

  GmmForecast gmm;
  gmm.steps.resize(p_.horizon);
  for (std::size_t k = 0; k < p_.horizon; ++k) {
    const double var = p_.var_base + p_.var_growth * static_cast<double>(k);
    auto mode = [&](double w, double o1, double o2) {
      GmmMode m;
      m.weight = w;
      m.mean = Control{mean.u1 + o1, mean.u2 + o2};
      m.cov[0][0] = var;
      m.cov[1][1] = var;
      return m;
    };
    gmm.steps[k].modes = {mode(0.6, 0.0, 0.0),
                          mode(0.2, p_.mode_offset.u1, p_.mode_offset.u2),
                          mode(0.2, -p_.mode_offset.u1, -p_.mode_offset.u2)};
  }
  f.sigma.reserve(p_.horizon);
  for (std::size_t k = 0; k < p_.horizon; ++k) {
    f.sigma.push_back(gmm_uncertainty_features(gmm, k));
  }
  f.gmm = std::move(gmm);
  return f;
}

OracleNoiseForecaster::OracleNoiseForecaster(OracleNoiseParams p) : p_(p) {
  if (p_.horizon == 0 || p_.required_history < 2) {
    throw std::invalid_argument("OracleNoiseForecaster: horizon >= 1 and history >= 2 required");
  }
  if (p_.noise_std < 0.0 || p_.noise_growth < 0.0 || p_.shift_factor < 0.0) {
    throw std::invalid_argument("OracleNoiseForecaster: scales must be nonnegative");
  }
}

void OracleNoiseForecaster::add_agent(int agent_id, const Trajectory& recorded) {
  true_controls_[agent_id] = estimate_controls(recorded);
}

Forecast OracleNoiseForecaster::predict(const Trajectory& history,
                                        int agent_id) const {
  check_history(history, p_.required_history);
  const auto it = true_controls_.find(agent_id);
  if (it == true_controls_.end()) {
    throw std::invalid_argument("OracleNoiseForecaster: unknown agent");
  }
  const ControlSequence& truth = it->second;
  // Index of the history's last state within the recording.
  const double t_now =
      history.t0 + history.dt * static_cast<double>(history.states.size() - 1);
  const std::int64_t t_idx =
      std::llround((t_now - truth.t0) / truth.dt);
  if (t_idx < 0 ||
      static_cast<std::size_t>(t_idx) + p_.horizon > truth.controls.size()) {
    throw std::invalid_argument("OracleNoiseForecaster: horizon extends past the recording");
  }

  double base = p_.noise_std;
  if (p_.shift_step >= 0 && t_idx >= p_.shift_step) {
    base *= p_.shift_factor;
  }

  GaussianStream gs(stream_seed(p_.seed, agent_id, t_idx));
  Forecast f;
  f.u_hat.t0 = truth.t0 + truth.dt * static_cast<double>(t_idx);
  f.u_hat.dt = truth.dt;
  f.u_hat.controls.reserve(p_.horizon);
  f.sigma.reserve(p_.horizon);
  for (std::size_t k = 0; k < p_.horizon; ++k) {
    const double sk = base * (1.0 + p_.noise_growth * static_cast<double>(k));
    const Control& tu = truth.controls[static_cast<std::size_t>(t_idx) + k];
    f.u_hat.controls.push_back(
        Control{tu.u1 + sk * gs.next(), tu.u2 + sk * gs.next()});
    f.sigma.push_back(UncertaintyVector{{1.0, sk}});
  }
  return f;
}

}  // namespace calreach
