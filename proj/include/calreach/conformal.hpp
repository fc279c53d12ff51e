#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "calreach/core.hpp"

namespace calreach {

enum class StretchMode { kLinear, kExponential };

// Rolling conformal calibration state. theta has one entry per prediction
// step offset and starts at zero.
struct ConformalState {
  std::vector<double> theta;
  double xi = 0.05;
  double alpha = 0.05;
  StretchMode mode = StretchMode::kLinear;
  double c = 1.0;
};

// Axis-aligned box over (u1, u2); closed on both ends.
struct ControlInterval {
  Control lo;
  Control hi;
};

struct ControlIntervalSequence {
  double t0 = 0.0;
  double dt = 0.5;
  std::vector<ControlInterval> steps;
};

// alpha = 1 - (1 - gamma)^(1/n): per-agent level so that n agents jointly
// miss at rate at most gamma. gamma in [0,1), n >= 1.
double corrected_alpha(double gamma, int n);

// Interval widening from the conformal parameter. Linear: theta itself.
// Exponential: sign(theta) * (e^(c*|theta|) - 1).
double stretch(double theta, StretchMode mode = StretchMode::kLinear,
               double c = 1.0);

// Closed-box membership over both control dimensions.
bool inside_interval(const Control& u, const ControlInterval& box);

// Per step k and dim j:
//   lower = u_hat + e_lo - stretch(theta[k]), upper = u_hat + e_hi + stretch(theta[k]);
// a crossed pair (lower > upper) collapses to its midpoint.
// e_lo / e_hi are indexed [step][dim].
ControlIntervalSequence calibrated_interval(
    const ControlSequence& u_hat,
    const std::vector<std::array<double, 2>>& e_lo,
    const std::vector<std::array<double, 2>>& e_hi, const ConformalState& cs);

// theta[k] += xi * (miss_k - alpha), miss_k = 1 iff the observed control at
// offset k falls outside the box in any dimension.
ConformalState rolling_update(const ConformalState& cs,
                              const ControlSequence& u_obs,
                              const ControlIntervalSequence& i_past);

}  // namespace calreach
