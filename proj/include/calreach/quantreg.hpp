#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "calreach/forecaster.hpp"

namespace calreach {

// Linear quantile model: predicts the epsilon-quantile of the forecast error
// as beta . sigma, trained online by pinball-loss subgradient steps.
struct QuantileModel {
  std::vector<double> beta;
  double epsilon = 0.5;
  double zeta = 0.01;
};

// L(y, y_hat) = (y - y_hat) * eps        if y >= y_hat
//             = (y_hat - y) * (1 - eps)  otherwise
double pinball_loss(double y, double y_hat, double epsilon);

// beta . sigma. Dimension mismatch rejected.
double qr_predict(const QuantileModel& m, const UncertaintyVector& sigma);

// One subgradient step at (y = e, y_hat = beta . sigma); ties use the
// y >= y_hat branch:
//   e >= y_hat: beta += zeta * eps * sigma
//   otherwise:  beta -= zeta * (1 - eps) * sigma
QuantileModel qr_update(const QuantileModel& m, const UncertaintyVector& sigma,
                        double e);

// Lower/upper model pair per control dimension per prediction step:
// lower at eps = alpha/2, upper at eps = 1 - alpha/2.
struct QuantileBank {
  std::size_t h = 0;
  std::size_t d = 0;
  double alpha = 0.05;
  // Layout: [dim][step][lower, upper], dims = 2.
  std::vector<QuantileModel> models;

  QuantileModel& model(int dim, std::size_t step, bool upper);
  const QuantileModel& model(int dim, std::size_t step, bool upper) const;
};

// Zero-initialized bank (deterministic default).
QuantileBank make_quantile_bank(std::size_t h, std::size_t d, double alpha,
                                double zeta);

// Seeded uniform(-scale, scale) initialization.
QuantileBank make_quantile_bank_random(std::size_t h, std::size_t d,
                                       double alpha, double zeta,
                                       std::uint64_t seed, double scale);

}  // namespace calreach
