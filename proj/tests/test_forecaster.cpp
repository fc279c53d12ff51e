#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "calreach/core.hpp"
#include "calreach/forecaster.hpp"
#include "oracles.hpp"

using namespace calreach;

namespace {

Trajectory make_history(std::vector<AgentState> states, double dt,
                        double t0 = 0.0) {
  Trajectory tr;
  tr.t0 = t0;
  tr.dt = dt;
  tr.states = std::move(states);
  return tr;
}

// Random piecewise-constant control trajectory, consistent with the dynamics.
Trajectory random_recording(std::mt19937_64& rng, std::size_t steps,
                            double dt) {
  ControlSequence seq;
  seq.t0 = 0.0;
  seq.dt = dt;
  for (std::size_t k = 0; k < steps; ++k) {
    seq.controls.push_back(Control{oracle::uniform(rng, -0.5, 0.5),
                                   oracle::uniform(rng, -0.8, 0.8)});
  }
  const AgentState s0{oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5),
                      oracle::uniform(rng, 1, 5),
                      oracle::uniform(rng, -3, 3)};
  return rollout(s0, seq);
}

}  // namespace

TEST_CASE("estimate_controls on a stationary history is zero") {
  const auto tr = make_history(
      {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}, 0.5);
  const auto seq = estimate_controls(tr);
  REQUIRE(seq.controls.size() == 3);
  for (const Control& u : seq.controls) {
    CHECK(u.u1 == 0.0);
    CHECK(u.u2 == 0.0);
  }
}

TEST_CASE("estimate_controls differences a speed ramp") {
  const auto tr =
      make_history({{0, 0, 0.0, 0}, {0, 0, 0.5, 0}, {0, 0, 1.0, 0}}, 0.5);
  const auto seq = estimate_controls(tr);
  REQUIRE(seq.controls.size() == 2);
  CHECK(seq.controls[0].u1 == doctest::Approx(1.0));
  CHECK(seq.controls[1].u1 == doctest::Approx(1.0));
}

TEST_CASE("estimate_controls wraps heading differences") {
  const auto tr = make_history(
      {{0, 0, 1, 0.0}, {0, 0, 1, kPi / 4}, {0, 0, 1, kPi / 2}}, 0.5);
  const auto seq = estimate_controls(tr);
  REQUIRE(seq.controls.size() == 2);
  CHECK(seq.controls[0].u2 == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(seq.controls[1].u2 == doctest::Approx(kPi / 2).epsilon(1e-12));
  // across the +pi/-pi seam
  const auto seam =
      make_history({{0, 0, 1, 3.0}, {0, 0, 1, -3.0}}, 0.5);
  const auto s2 = estimate_controls(seam);
  CHECK(s2.controls[0].u2 ==
        doctest::Approx((2.0 * kPi - 6.0) / 0.5).epsilon(1e-12));
}

TEST_CASE("estimate_controls rejects short histories") {
  CHECK_THROWS_AS(estimate_controls(make_history({{0, 0, 0, 0}}, 0.5)),
                  std::invalid_argument);
}

TEST_CASE("estimate_controls then rollout reproduces the history") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Trajectory rec = random_recording(rng, 12, 0.5);
    const ControlSequence est = estimate_controls(rec);
    const Trajectory rep = rollout(rec.states.front(), est);
    REQUIRE(rep.states.size() == rec.states.size());
    for (std::size_t k = 0; k < rec.states.size(); ++k) {
      CHECK(std::fabs(rep.states[k].v - rec.states[k].v) < 1e-9);
      CHECK(std::fabs(wrap_angle(rep.states[k].theta - rec.states[k].theta)) <
            1e-9);
      CHECK(std::fabs(rep.states[k].x - rec.states[k].x) < 1e-6);
      CHECK(std::fabs(rep.states[k].y - rec.states[k].y) < 1e-6);
    }
  }
}

TEST_CASE("gmm features of a point mass") {
  GmmForecast g;
  g.steps.resize(1);
  GmmMode m;
  m.weight = 1.0;
  g.steps[0].modes = {m};
  const auto u = gmm_uncertainty_features(g, 0);
  REQUIRE(u.sigma.size() == 6);
  CHECK(u.sigma[0] == 1.0);
  for (std::size_t i = 1; i < 6; ++i) {
    CHECK(u.sigma[i] == 0.0);
  }
}

TEST_CASE("gmm features of a symmetric two-mode mixture") {
  GmmForecast g;
  g.steps.resize(1);
  GmmMode a, b;
  a.weight = b.weight = 0.5;
  a.mean = {-1.0, 0.0};
  b.mean = {1.0, 0.0};
  a.cov[0][0] = a.cov[1][1] = 1.0;
  b.cov[0][0] = b.cov[1][1] = 1.0;
  g.steps[0].modes = {a, b};
  const auto u = gmm_uncertainty_features(g, 0);
  CHECK(u.sigma[1] == doctest::Approx(1.0));  // tie -> first mode is top
  CHECK(u.sigma[2] == doctest::Approx(1.0));
  CHECK(u.sigma[3] == 0.0);
  CHECK(u.sigma[4] == doctest::Approx(2.0));
  CHECK(u.sigma[5] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gmm features of a deterministic mixture") {
  GmmForecast g;
  g.steps.resize(1);
  GmmMode a, b, c;
  a.weight = 1.0;
  b.weight = 0.0;
  c.weight = 0.0;
  a.cov[0][0] = 0.25;
  a.cov[1][1] = 0.04;
  b.cov[0][0] = 9.0;  // must not leak into features
  b.cov[1][1] = 9.0;
  g.steps[0].modes = {a, b, c};
  const auto u = gmm_uncertainty_features(g, 0);
  CHECK(u.sigma[1] == doctest::Approx(0.5));
  CHECK(u.sigma[2] == doctest::Approx(0.2));
  CHECK(u.sigma[5] == 0.0);
}

TEST_CASE("gmm features reject degenerate inputs") {
  GmmForecast g;
  g.steps.resize(1);
  GmmMode m;
  m.weight = 1.0;
  m.cov[0][0] = 1.0;
  m.cov[1][1] = 1.0;
  m.cov[0][1] = m.cov[1][0] = 2.0;  // indefinite
  g.steps[0].modes = {m};
  CHECK_THROWS_AS(gmm_uncertainty_features(g, 0), std::invalid_argument);

  m.cov[0][1] = 0.5;
  m.cov[1][0] = 0.0;  // asymmetric
  g.steps[0].modes = {m};
  CHECK_THROWS_AS(gmm_uncertainty_features(g, 0), std::invalid_argument);

  m.cov[0][1] = m.cov[1][0] = 0.0;
  m.weight = 0.7;  // weights don't sum to 1
  g.steps[0].modes = {m};
  CHECK_THROWS_AS(gmm_uncertainty_features(g, 0), std::invalid_argument);

  m.weight = 1.0;
  g.steps[0].modes = {m};
  CHECK_THROWS_AS(gmm_uncertainty_features(g, 1), std::invalid_argument);
}

TEST_CASE("constant-control forecaster repeats the recent mean") {
  ConstantControlParams p;
  ConstantControlForecaster fc(p);
  // constant-velocity history
  std::vector<AgentState> states;
  for (int k = 0; k < 8; ++k) {
    states.push_back({0.5 * k, 0, 1, 0});
  }
  const auto f = fc.predict(make_history(states, 0.5), 0);
  REQUIRE(f.u_hat.controls.size() == 6);
  REQUIRE(f.sigma.size() == 6);
  for (const Control& u : f.u_hat.controls) {
    CHECK(u.u1 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(u.u2 == doctest::Approx(0.0).epsilon(1e-9));
  }
  // 6 features, bias first, spread grows with the prediction step
  for (std::size_t k = 0; k < 6; ++k) {
    REQUIRE(f.sigma[k].sigma.size() == 6);
    CHECK(f.sigma[k].sigma[0] == 1.0);
    CHECK(f.sigma[k].sigma[1] ==
          doctest::Approx(std::sqrt(p.var_base + p.var_growth * k)));
  }
  for (std::size_t k = 1; k < 6; ++k) {
    CHECK(f.sigma[k].sigma[1] > f.sigma[k - 1].sigma[1]);
  }
  CHECK(f.gmm.has_value());
}

TEST_CASE("constant-control forecaster averages the last two controls") {
  ConstantControlForecaster fc({});
  // v: 0 .. 2.1 in steps of 0.3 -> u1 = 0.6 throughout except last step 0.9
  std::vector<AgentState> states;
  double v = 0.0;
  for (int k = 0; k < 8; ++k) {
    states.push_back({0, 0, v, 0});
    v += (k == 6) ? 0.45 : 0.3;
  }
  const auto f = fc.predict(make_history(states, 0.5), 0);
  // last two estimated u1: 0.6 and 0.9 -> mean 0.75
  CHECK(f.u_hat.controls[0].u1 == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("forecaster rejects insufficient history") {
  ConstantControlForecaster fc({});
  std::vector<AgentState> states(3, AgentState{0, 0, 1, 0});
  CHECK_THROWS_AS(fc.predict(make_history(states, 0.5), 0),
                  std::invalid_argument);
}

TEST_CASE("oracle forecaster with zero noise returns the true controls") {
  std::mt19937_64 rng(9);
  const Trajectory rec = random_recording(rng, 20, 0.5);
  OracleNoiseParams p;
  p.noise_std = 0.0;
  OracleNoiseForecaster fc(p);
  fc.add_agent(4, rec);

  Trajectory hist = make_history(
      {rec.states.begin(), rec.states.begin() + 8}, 0.5, rec.t0);
  const auto f = fc.predict(hist, 4);
  const ControlSequence truth = estimate_controls(rec);
  REQUIRE(f.u_hat.controls.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(f.u_hat.controls[k].u1 == truth.controls[7 + k].u1);
    CHECK(f.u_hat.controls[k].u2 == truth.controls[7 + k].u2);
    CHECK(f.sigma[k].sigma == std::vector<double>{1.0, 0.0});
  }
}

TEST_CASE("oracle forecaster noise stream is keyed by agent and time") {
  std::mt19937_64 rng(10);
  const Trajectory rec_a = random_recording(rng, 24, 0.5);
  const Trajectory rec_b = random_recording(rng, 24, 0.5);
  OracleNoiseParams p;
  p.noise_std = 0.2;
  p.noise_growth = 0.3;
  p.seed = 123;
  OracleNoiseForecaster fc(p);
  fc.add_agent(1, rec_a);
  fc.add_agent(2, rec_b);

  auto hist = [&](const Trajectory& rec, std::size_t last) {
    return make_history(
        {rec.states.begin() + (last - 7), rec.states.begin() + (last + 1)},
        0.5, rec.t0 + 0.5 * (last - 7));
  };

  const auto f1 = fc.predict(hist(rec_a, 7), 1);
  const auto f2 = fc.predict(hist(rec_b, 7), 2);
  const auto f1_again = fc.predict(hist(rec_a, 7), 1);

  // deterministic replay, unaffected by interleaved calls
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(f1.u_hat.controls[k].u1 == f1_again.u_hat.controls[k].u1);
    CHECK(f1.u_hat.controls[k].u2 == f1_again.u_hat.controls[k].u2);
  }
  // distinct agents get distinct noise
  bool differs = false;
  const ControlSequence ta = estimate_controls(rec_a);
  const ControlSequence tb = estimate_controls(rec_b);
  for (std::size_t k = 0; k < 6; ++k) {
    const double na = f1.u_hat.controls[k].u1 - ta.controls[7 + k].u1;
    const double nb = f2.u_hat.controls[k].u1 - tb.controls[7 + k].u1;
    if (std::fabs(na - nb) > 1e-12) differs = true;
  }
  CHECK(differs);
  // per-step feature scale
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(f1.sigma[k].sigma[1] == doctest::Approx(0.2 * (1.0 + 0.3 * k)));
  }
}

TEST_CASE("oracle forecaster noise statistics match the configured scale") {
  std::mt19937_64 rng(11);
  const Trajectory rec = random_recording(rng, 1210, 0.5);
  OracleNoiseParams p;
  p.noise_std = 0.2;
  p.noise_growth = 0.0;
  p.seed = 7;
  OracleNoiseForecaster fc(p);
  fc.add_agent(0, rec);
  const ControlSequence truth = estimate_controls(rec);

  std::vector<double> draws;
  for (std::size_t last = 7; last + 6 < 1200; ++last) {
    Trajectory hist;
    hist.t0 = rec.t0 + 0.5 * (last - 7);
    hist.dt = 0.5;
    hist.states.assign(rec.states.begin() + (last - 7),
                       rec.states.begin() + (last + 1));
    const auto f = fc.predict(hist, 0);
    draws.push_back(f.u_hat.controls[0].u1 - truth.controls[last].u1);
  }
  CHECK(std::fabs(oracle::mean(draws)) < 0.02);
  CHECK(oracle::sample_std(draws) == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("oracle forecaster applies the distribution shift") {
  std::mt19937_64 rng(12);
  const Trajectory rec = random_recording(rng, 40, 0.5);
  OracleNoiseParams p;
  p.noise_std = 0.1;
  p.shift_step = 20;
  p.shift_factor = 3.0;
  OracleNoiseForecaster fc(p);
  fc.add_agent(0, rec);

  auto hist = [&](std::size_t last) {
    Trajectory h;
    h.t0 = rec.t0 + 0.5 * (last - 7);
    h.dt = 0.5;
    h.states.assign(rec.states.begin() + (last - 7),
                    rec.states.begin() + (last + 1));
    return h;
  };
  const auto before = fc.predict(hist(19), 0);
  const auto after = fc.predict(hist(20), 0);
  CHECK(before.sigma[0].sigma[1] == doctest::Approx(0.1));
  CHECK(after.sigma[0].sigma[1] == doctest::Approx(0.3));
}

TEST_CASE("oracle forecaster rejects unknown agents and missing future") {
  std::mt19937_64 rng(13);
  const Trajectory rec = random_recording(rng, 12, 0.5);
  OracleNoiseForecaster fc({});
  fc.add_agent(0, rec);
  Trajectory hist;
  hist.t0 = rec.t0;
  hist.dt = 0.5;
  hist.states.assign(rec.states.begin(), rec.states.begin() + 8);
  CHECK_THROWS_AS(fc.predict(hist, 5), std::invalid_argument);
  // last 8 states: prediction would need controls past the recording end
  Trajectory tail;
  tail.dt = 0.5;
  tail.t0 = rec.t0 + 0.5 * 5;
  tail.states.assign(rec.states.begin() + 5, rec.states.end());
  CHECK_THROWS_AS(fc.predict(tail, 0), std::invalid_argument);
}
