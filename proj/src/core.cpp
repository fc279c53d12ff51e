#include "calreach/core.hpp"

#include <cmath>
#include <stdexcept>

namespace calreach {

namespace {

// Substep cap. At |u2| <= pi the per-substep RK4 error is ~1e-9, so a 1 s
// step stays well under 1e-6 overall.
constexpr double kMaxSubstep = 0.02;

void deriv(const AgentState& z, const Control& u, double d[4]) {
  d[0] = z.v * std::cos(z.theta);
  d[1] = z.v * std::sin(z.theta);
  d[2] = u.u1;
  d[3] = u.u2;
}

AgentState rk4_once(const AgentState& s, const Control& u, double dt) {
  double k1[4], k2[4], k3[4], k4[4];
  deriv(s, u, k1);
  AgentState m{s.x + 0.5 * dt * k1[0], s.y + 0.5 * dt * k1[1],
               s.v + 0.5 * dt * k1[2], s.theta + 0.5 * dt * k1[3]};
  deriv(m, u, k2);
  m = AgentState{s.x + 0.5 * dt * k2[0], s.y + 0.5 * dt * k2[1],
                 s.v + 0.5 * dt * k2[2], s.theta + 0.5 * dt * k2[3]};
  deriv(m, u, k3);
  m = AgentState{s.x + dt * k3[0], s.y + dt * k3[1], s.v + dt * k3[2],
                 s.theta + dt * k3[3]};
  deriv(m, u, k4);
  const double w = dt / 6.0;
  return AgentState{s.x + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                    s.y + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                    s.v + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
                    s.theta + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])};
}

bool finite_state(const AgentState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.v) &&
         std::isfinite(s.theta);
}

}  // namespace

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("wrap_angle: angle must be finite");
  }
  // remainder lands in [-pi, pi]; fold the closed lower end onto +pi.
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) {
    r += kTwoPi;
  }
  return r;
}

namespace detail {

AgentState flow(const AgentState& s, const Control& u, double dt) {
  const double adt = std::fabs(dt);
  if (adt == 0.0) {
    return s;
  }
  const int n = static_cast<int>(std::ceil(adt / kMaxSubstep));
  const double h = dt / n;
  AgentState z = s;
  for (int i = 0; i < n; ++i) {
    z = rk4_once(z, u, h);
  }
  return z;
}

}  // namespace detail

AgentState dubins_step(const AgentState& s, const Control& u, double dt) {
  if (!finite_state(s) || !std::isfinite(u.u1) || !std::isfinite(u.u2)) {
    throw std::invalid_argument("dubins_step: state and control must be finite");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("dubins_step: dt must be positive and finite");
  }
  AgentState z = detail::flow(s, u, dt);
  z.theta = wrap_angle(z.theta);
  return z;
}

Trajectory rollout(const AgentState& s0, const ControlSequence& u_seq) {
  if (u_seq.controls.empty()) {
    throw std::invalid_argument("rollout: control sequence must be nonempty");
  }
  Trajectory tr;
  tr.t0 = u_seq.t0;
  tr.dt = u_seq.dt;
  tr.states.reserve(u_seq.controls.size() + 1);
  tr.states.push_back(s0);
  for (const Control& u : u_seq.controls) {
    tr.states.push_back(dubins_step(tr.states.back(), u, u_seq.dt));
  }
  return tr;
}

}  // namespace calreach
