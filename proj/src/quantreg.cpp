#include "calreach/quantreg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace calreach {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw std::invalid_argument("quantile level must lie in (0, 1)");
  }
}

void check_dims(const QuantileModel& m, const UncertaintyVector& sigma) {
  if (m.beta.size() != sigma.sigma.size()) {
    throw std::invalid_argument("quantile model and feature dimensions differ");
  }
}

}  // namespace

double pinball_loss(double y, double y_hat, double epsilon) {
  check_epsilon(epsilon);
  if (!std::isfinite(y) || !std::isfinite(y_hat)) {
    throw std::invalid_argument("pinball_loss: arguments must be finite");
  }
  return y >= y_hat ? (y - y_hat) * epsilon : (y_hat - y) * (1.0 - epsilon);
}

double qr_predict(const QuantileModel& m, const UncertaintyVector& sigma) {
  check_dims(m, sigma);
  double acc = 0.0;
  for (std::size_t i = 0; i < m.beta.size(); ++i) {
    acc += m.beta[i] * sigma.sigma[i];
  }
  return acc;
}

QuantileModel qr_update(const QuantileModel& m, const UncertaintyVector& sigma,
                        double e) {
  check_epsilon(m.epsilon);
  check_dims(m, sigma);
  if (!std::isfinite(e)) {
    throw std::invalid_argument("qr_update: error must be finite");
  }
  const double y_hat = qr_predict(m, sigma);
  const double step =
      e >= y_hat ? m.zeta * m.epsilon : -m.zeta * (1.0 - m.epsilon);
  QuantileModel out = m;
  for (std::size_t i = 0; i < out.beta.size(); ++i) {
    out.beta[i] += step * sigma.sigma[i];
  }
  return out;
}

QuantileModel& QuantileBank::model(int dim, std::size_t step, bool upper) {
  return models.at((static_cast<std::size_t>(dim) * h + step) * 2 +
                   (upper ? 1 : 0));
}

const QuantileModel& QuantileBank::model(int dim, std::size_t step,
                                         bool upper) const {
  return models.at((static_cast<std::size_t>(dim) * h + step) * 2 +
                   (upper ? 1 : 0));
}

QuantileBank make_quantile_bank(std::size_t h, std::size_t d, double alpha,
                                double zeta) {
  if (h == 0 || d == 0) {
    throw std::invalid_argument("make_quantile_bank: h and d must be positive");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("make_quantile_bank: alpha must lie in (0, 1)");
  }
  if (!(zeta > 0.0)) {
    throw std::invalid_argument("make_quantile_bank: zeta must be positive");
  }
  QuantileBank bank;
  bank.h = h;
  bank.d = d;
  bank.alpha = alpha;
  bank.models.resize(2 * h * 2);
  for (int dim = 0; dim < 2; ++dim) {
    for (std::size_t k = 0; k < h; ++k) {
      for (int up = 0; up < 2; ++up) {
        QuantileModel& m = bank.model(dim, k, up == 1);
        m.beta.assign(d, 0.0);
        m.epsilon = up == 1 ? 1.0 - alpha / 2.0 : alpha / 2.0;
        m.zeta = zeta;
      }
    }
  }
  return bank;
}

QuantileBank make_quantile_bank_random(std::size_t h, std::size_t d,
                                       double alpha, double zeta,
                                       std::uint64_t seed, double scale) {
  QuantileBank bank = make_quantile_bank(h, d, alpha, zeta);
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (QuantileModel& m : bank.models) {
    for (double& b : m.beta) {
      b = scale * (2.0 * unit() - 1.0);
    }
  }
  return bank;
}

}  // namespace calreach
