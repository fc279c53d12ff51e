#include "calreach/conformal.hpp"

#include <cmath>
#include <stdexcept>

namespace calreach {

double corrected_alpha(double gamma, int n) {
  if (!(gamma >= 0.0) || !(gamma < 1.0)) {
    throw std::invalid_argument("corrected_alpha: gamma must lie in [0, 1)");
  }
  if (n < 1) {
    throw std::invalid_argument("corrected_alpha: n must be at least 1");
  }
  return 1.0 - std::pow(1.0 - gamma, 1.0 / static_cast<double>(n));
}

double stretch(double theta, StretchMode mode, double c) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("stretch: theta must be finite");
  }
  if (mode == StretchMode::kLinear) {
    return theta;
  }
  const double m = std::expm1(c * std::fabs(theta));
  return theta >= 0.0 ? m : -m;
}

bool inside_interval(const Control& u, const ControlInterval& box) {
  return u.u1 >= box.lo.u1 && u.u1 <= box.hi.u1 && u.u2 >= box.lo.u2 &&
         u.u2 <= box.hi.u2;
}

ControlIntervalSequence calibrated_interval(
    const ControlSequence& u_hat,
    const std::vector<std::array<double, 2>>& e_lo,
    const std::vector<std::array<double, 2>>& e_hi, const ConformalState& cs) {
  const std::size_t h = u_hat.controls.size();
  if (e_lo.size() != h || e_hi.size() != h || cs.theta.size() != h) {
    throw std::invalid_argument("calibrated_interval: length mismatch");
  }
  ControlIntervalSequence out;
  out.t0 = u_hat.t0;
  out.dt = u_hat.dt;
  out.steps.reserve(h);
  for (std::size_t k = 0; k < h; ++k) {
    const double w = stretch(cs.theta[k], cs.mode, cs.c);
    const double base[2] = {u_hat.controls[k].u1, u_hat.controls[k].u2};
    double lo[2], hi[2];
    for (int j = 0; j < 2; ++j) {
      lo[j] = base[j] + e_lo[k][j] - w;
      hi[j] = base[j] + e_hi[k][j] + w;
      if (lo[j] > hi[j]) {
        const double mid = 0.5 * (lo[j] + hi[j]);
        lo[j] = mid;
        hi[j] = mid;
      }
    }
    out.steps.push_back(
        ControlInterval{Control{lo[0], lo[1]}, Control{hi[0], hi[1]}});
  }
  return out;
}

ConformalState rolling_update(const ConformalState& cs,
                              const ControlSequence& u_obs,
                              const ControlIntervalSequence& i_past) {
  const std::size_t h = cs.theta.size();
  if (u_obs.controls.size() != h || i_past.steps.size() != h) {
    throw std::invalid_argument("rolling_update: misaligned observation and interval");
  }
  ConformalState out = cs;
  for (std::size_t k = 0; k < h; ++k) {
    const double miss =
        inside_interval(u_obs.controls[k], i_past.steps[k]) ? 0.0 : 1.0;
    out.theta[k] += cs.xi * (miss - cs.alpha);
  }
  return out;
}

}  // namespace calreach
