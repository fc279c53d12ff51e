#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "calreach/core.hpp"

namespace calreach {

// One GMM component over (u1, u2). cov is row-major, symmetric PSD.
struct GmmMode {
  double weight = 1.0;
  Control mean;
  double cov[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
};

struct GmmStep {
  std::vector<GmmMode> modes;
};

// One GMM per prediction step.
struct GmmForecast {
  std::vector<GmmStep> steps;
};

// Nonnegative feature vector fed to the quantile models; one per agent per
// prediction step. Dimension d is fixed per run.
struct UncertaintyVector {
  std::vector<double> sigma;
};

struct Forecast {
  ControlSequence u_hat;                 // h predicted controls
  std::vector<UncertaintyVector> sigma;  // h feature vectors
  std::optional<GmmForecast> gmm;
};

// Finite differences of the recorded (v, theta) sequences:
// u1[k] = (v[k+1]-v[k])/dt, u2[k] = wrap(theta[k+1]-theta[k])/dt.
// Result length = states - 1. History needs >= 2 states.
ControlSequence estimate_controls(const Trajectory& history);

// Fixed 6-feature summary of one GMM step:
// [1, sqrt(top-mode var u1), sqrt(top-mode var u2), |top-mode cov(u1,u2)|,
//  max pairwise distance between mode means, entropy of mode weights].
// Top mode = highest weight, first on ties. Rejects covariances with an
// eigenvalue below -1e-9 or an asymmetry above 1e-9.
UncertaintyVector gmm_uncertainty_features(const GmmForecast& g,
                                           std::size_t step);

// Forecasting interface: maps an agent's state history to h predicted
// controls plus per-step uncertainty features. Implementations are
// deterministic given their construction-time seed; agent_id selects the
// per-agent noise stream where one exists.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::size_t horizon() const = 0;
  virtual std::size_t required_history() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual Forecast predict(const Trajectory& history, int agent_id) const = 0;
};

Forecast predict(const Trajectory& history, const Forecaster& model,
                 int agent_id = 0);

struct ConstantControlParams {
  std::size_t horizon = 6;
  std::size_t required_history = 8;
  // Modes 2 and 3 sit at mean +/- offset with weights (0.6, 0.2, 0.2).
  Control mode_offset{0.5, 0.1};
  // Per-step diagonal covariance var_base + var_growth * k.
  double var_base = 0.04;
  double var_growth = 0.02;
};

// Repeats the mean of the last two estimated controls for h steps and wraps
// it in a 3-mode GMM whose covariance grows linearly with prediction step.
class ConstantControlForecaster : public Forecaster {
 public:
  explicit ConstantControlForecaster(ConstantControlParams p);
  std::size_t horizon() const override { return p_.horizon; }
  std::size_t required_history() const override { return p_.required_history; }
  std::size_t feature_dim() const override { return 6; }
  Forecast predict(const Trajectory& history, int agent_id) const override;

 private:
  ConstantControlParams p_;
};

struct OracleNoiseParams {
  std::size_t horizon = 6;
  std::size_t required_history = 8;
  double noise_std = 0.2;
  // Per-step std scale: std_k = base * (1 + noise_growth * k).
  double noise_growth = 0.3;
  // From recording index shift_step on, base std is multiplied by
  // shift_factor (models a distribution shift). Negative disables.
  std::int64_t shift_step = -1;
  double shift_factor = 1.0;
  std::uint64_t seed = 0;
};

// Returns the agent's true future controls (estimated from its recording)
// plus seeded Gaussian noise. The noise stream is keyed by (agent, time
// index) so prediction order never changes outputs. sigma = [1, std_k], d=2.
class OracleNoiseForecaster : public Forecaster {
 public:
  explicit OracleNoiseForecaster(OracleNoiseParams p);
  // Registers an agent's full recording; must cover every predicted step.
  void add_agent(int agent_id, const Trajectory& recorded);
  std::size_t horizon() const override { return p_.horizon; }
  std::size_t required_history() const override { return p_.required_history; }
  std::size_t feature_dim() const override { return 2; }
  Forecast predict(const Trajectory& history, int agent_id) const override;

 private:
  OracleNoiseParams p_;
  std::map<int, ControlSequence> true_controls_;
};

}  // namespace calreach
