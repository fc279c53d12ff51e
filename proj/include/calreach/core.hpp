#pragma once

#include <vector>

namespace calreach {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Extended Dubins car state. theta is kept in (-pi, pi]; v is signed and
// unbounded (the dynamics never clamp it).
struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;
};

// Acceleration (m/s^2) and turn rate (rad/s).
struct Control {
  double u1 = 0.0;
  double u2 = 0.0;
};

// Uniformly spaced state sequence starting at time t0.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.5;
  std::vector<AgentState> states;
};

// Uniformly spaced control sequence; controls[k] acts over [t0+k*dt, t0+(k+1)*dt).
struct ControlSequence {
  double t0 = 0.0;
  double dt = 0.5;
  std::vector<Control> controls;
};

// Wraps an angle into (-pi, pi]. Throws std::invalid_argument on non-finite input.
double wrap_angle(double a);

// One step of xdot = [v cos(theta), v sin(theta), u1, u2] over dt > 0.
// Classical RK4, internally substepped so accuracy does not degrade with
// caller-sized dt; theta of the result is wrapped.
AgentState dubins_step(const AgentState& s, const Control& u, double dt);

// Iterated dubins_step. Result length = controls length + 1, first state = s0,
// spacing u_seq.dt, start time u_seq.t0.
Trajectory rollout(const AgentState& s0, const ControlSequence& u_seq);

namespace detail {

// Substepped RK4 flow with signed dt (negative integrates backward in time).
// theta is left unwrapped. No input validation.
AgentState flow(const AgentState& s, const Control& u, double dt);

}  // namespace detail

}  // namespace calreach
