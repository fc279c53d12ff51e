#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "calreach/core.hpp"
#include "oracles.hpp"

using calreach::AgentState;
using calreach::Control;
using calreach::ControlSequence;
using calreach::kPi;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(calreach::wrap_angle(0.0) == 0.0);
  CHECK(calreach::wrap_angle(3.0 * kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(calreach::wrap_angle(-1.5 * kPi) ==
        doctest::Approx(0.5 * kPi).epsilon(1e-12));
  CHECK(calreach::wrap_angle(kPi) == kPi);
  CHECK(calreach::wrap_angle(-kPi) == kPi);
}

TEST_CASE("wrap_angle is idempotent and lands in range") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double a = oracle::uniform(rng, -50.0, 50.0);
    const double w = calreach::wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(calreach::wrap_angle(w) == w);
    // congruence mod 2*pi
    CHECK(std::remainder(a - w, 2.0 * kPi) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("wrap_angle rejects non-finite input") {
  CHECK_THROWS_AS(calreach::wrap_angle(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(calreach::wrap_angle(INFINITY), std::invalid_argument);
}

TEST_CASE("dubins_step constant velocity along x") {
  const AgentState s = calreach::dubins_step({0, 0, 1, 0}, {0, 0}, 0.5);
  CHECK(s.x == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.v == 1.0);
  CHECK(s.theta == 0.0);
}

TEST_CASE("dubins_step matches the analytic constant-turn-rate arc") {
  // x(t) = sin(pi t)/pi, y(t) = (1 - cos(pi t))/pi at t = 1
  const AgentState s = calreach::dubins_step({0, 0, 1, 0}, {0, kPi}, 1.0);
  CHECK(std::fabs(s.x - 0.0) < 1e-6);
  CHECK(std::fabs(s.y - 2.0 / kPi) < 1e-6);
  CHECK(std::fabs(s.v - 1.0) < 1e-12);
  CHECK(std::fabs(calreach::wrap_angle(s.theta - kPi)) < 1e-6);
}

TEST_CASE("dubins_step is exact on polynomial flow") {
  const AgentState s = calreach::dubins_step({0, 0, 0, 0}, {2, 0}, 1.0);
  CHECK(std::fabs(s.x - 1.0) < 1e-9);
  CHECK(std::fabs(s.y - 0.0) < 1e-9);
  CHECK(std::fabs(s.v - 2.0) < 1e-9);
  CHECK(std::fabs(s.theta - 0.0) < 1e-9);
}

TEST_CASE("dubins_step with zero control preserves v and theta exactly") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const AgentState s0{oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5),
                        oracle::uniform(rng, -3, 3),
                        calreach::wrap_angle(oracle::uniform(rng, -3, 3))};
    const AgentState s1 = calreach::dubins_step(s0, {0, 0}, 0.7);
    CHECK(s1.v == s0.v);
    CHECK(s1.theta == s0.theta);
  }
}

TEST_CASE("dubins_step agrees with a 1000-substep Euler oracle") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    const AgentState s0{oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5),
                        oracle::uniform(rng, -0.5, 0.5),
                        oracle::uniform(rng, -kPi, kPi)};
    const Control u{oracle::uniform(rng, -0.02, 0.02),
                    oracle::uniform(rng, -0.02, 0.02)};
    const AgentState a = calreach::dubins_step(s0, u, 0.5);
    const AgentState b = oracle::euler_flow(s0, u, 0.5, 1000);
    CHECK(std::fabs(a.x - b.x) < 1e-5);
    CHECK(std::fabs(a.y - b.y) < 1e-5);
    CHECK(std::fabs(a.v - b.v) < 1e-5);
    CHECK(std::fabs(calreach::wrap_angle(a.theta - b.theta)) < 1e-5);
  }
}

TEST_CASE("dubins_step rejects bad input") {
  CHECK_THROWS_AS(calreach::dubins_step({0, 0, 1, 0}, {0, 0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(calreach::dubins_step({0, 0, 1, 0}, {0, 0}, -0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      calreach::dubins_step({std::nan(""), 0, 1, 0}, {0, 0}, 0.5),
      std::invalid_argument);
  CHECK_THROWS_AS(calreach::dubins_step({0, 0, 1, 0}, {INFINITY, 0}, 0.5),
                  std::invalid_argument);
}

TEST_CASE("rollout constant velocity positions") {
  ControlSequence seq;
  seq.dt = 0.5;
  seq.controls = {{0, 0}, {0, 0}};
  const auto tr = calreach::rollout({0, 0, 1, 0}, seq);
  REQUIRE(tr.states.size() == 3);
  CHECK(tr.states[0].x == doctest::Approx(0.0));
  CHECK(tr.states[1].x == doctest::Approx(0.5));
  CHECK(tr.states[2].x == doctest::Approx(1.0));
}

TEST_CASE("rollout length contract") {
  ControlSequence seq;
  seq.dt = 0.5;
  seq.controls = {{1, 1}};
  const auto tr = calreach::rollout({2, -1, 0.3, 1.0}, seq);
  CHECK(tr.states.size() == 2);
  CHECK(tr.states[0].x == 2.0);
  CHECK(tr.dt == 0.5);
}

TEST_CASE("rollout integrates acceleration exactly") {
  ControlSequence seq;
  seq.dt = 0.1;
  seq.controls.assign(10, Control{1, 0});
  const auto tr = calreach::rollout({0, 0, 0, 0}, seq);
  REQUIRE(tr.states.size() == 11);
  CHECK(std::fabs(tr.states.back().v - 1.0) < 1e-9);
}

TEST_CASE("rollout rejects empty control sequences") {
  ControlSequence seq;
  seq.dt = 0.5;
  CHECK_THROWS_AS(calreach::rollout({0, 0, 0, 0}, seq), std::invalid_argument);
}
