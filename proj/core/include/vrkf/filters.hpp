#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrkf/losses.hpp"
#include "vrkf/statespace.hpp"

#include <nlohmann/json_fwd.hpp>

namespace vrkf {

struct FilterState {
  VectorXd x;
  MatrixXd P;
};

// Per-channel adaptive state. Channels with rho == 1 keep nu and tau2 frozen;
// channels with rho < 1 discount them geometrically each step.
struct ChannelHyper {
  VectorXd nu;
  VectorXd tau2;
  VectorXd rho;

  int channels() const { return static_cast<int>(nu.size()); }
  void validate() const;
};

struct StepDiagnostics {
  int iterations = 1;
  VectorXd e;            // whitened residuals at the committed estimate
  VectorXd lambda;       // per-channel inflated variance, 1/weight
  VectorXd innovation;   // y - C x_pred
  std::vector<bool> reverted;  // per-channel switch decisions (AR2 only)
};

struct Ar2Config {
  double eta = 1.0;               // threshold multiplier, advised range [0.25, 1]
  std::vector<bool> enabled;      // per-channel; empty means all adaptive channels

  bool channel_enabled(int i) const {
    return enabled.empty() || enabled.at(static_cast<size_t>(i));
  }
  // Out-of-range eta is allowed; returns a warning message for it.
  std::optional<std::string> validate() const;
};

// The fixed-point loop failed to produce a usable iterate (non-finite or
// norm above 1e12); callers may retry with larger nu.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WhitenResult {
  VectorXd t;   // stacked whitened prior mean and measurement, length n+m
  MatrixXd W;   // whitened regressor, (n+m) x n
  MatrixXd Bp;  // Bp Bp^T = P_pred
  MatrixXd Br;  // Br Br^T = R_star
};

// Factors the prior and measurement covariances and maps (x_pred, y) into the
// stacked regression t = W x + noise with unit nominal noise covariance.
// Cholesky first; falls back to the symmetric eigenvalue square root, and
// throws if the matrix is not positive definite.
WhitenResult whiten(const VectorXd& x_pred, const MatrixXd& P_pred,
                    const MatrixXd& R_star, const VectorXd& y, const MatrixXd& C);

struct RobustUpdateResult {
  VectorXd x;        // posterior mean
  MatrixXd gain;     // last gain of the loop, n x m
  MatrixXd R_tilde;  // last inflated measurement covariance
  int iterations = 0;
  VectorXd e;        // whitened residuals at x
  VectorXd lambda;   // 1/weight per channel at x
};

// Iteratively reweighted update: x <- x_pred + K (y - C x_pred) with the
// prior and measurement covariances inflated by the reciprocal loss weights
// evaluated at the previous iterate. Stops when the relative step change
// drops to epsilon or after max_iterations passes.
RobustUpdateResult robust_update(const VectorXd& t, const MatrixXd& W,
                                 const ChannelLosses& losses,
                                 const VectorXd& x_pred, const MatrixXd& Bp,
                                 const MatrixXd& Br, const MatrixXd& C,
                                 double epsilon, int max_iterations);

// Joseph-form posterior covariance (I-KC) P (I-KC)^T + K R K^T, re-symmetrized.
MatrixXd posterior_cov(const MatrixXd& P_pred, const MatrixXd& gain,
                       const MatrixXd& C, const MatrixXd& R);

struct StepResult {
  FilterState state;
  StepDiagnostics diag;
};

struct AdaptiveStepResult {
  FilterState state;
  StepDiagnostics diag;
  ChannelHyper hyper;
};

using OptionalInput = std::optional<VectorXd>;

// Standard predict/update with Joseph covariance.
StepResult kf_step(const LinearModel& model, const FilterState& state,
                   const OptionalInput& u, const VectorXd& y);

// Fixed-hyperparameter robust filter step; the posterior covariance is
// computed once, after the fixed-point loop.
StepResult stkf_step(const LinearModel& model, const FilterState& state,
                     const OptionalInput& u, const VectorXd& y,
                     const ChannelLosses& losses, double epsilon,
                     int max_iterations);

// Coupled variational update with fixed priors on the per-measurement-channel
// variances: alternates a state update using the current variances with the
// posterior-mean variance refresh, a fixed number of times, recomputing the
// posterior covariance inside the loop.
StepResult vbkf_fixed_step(const LinearModel& model, const FilterState& state,
                           const OptionalInput& u, const VectorXd& y,
                           const VectorXd& nu, const VectorXd& tau2,
                           int vb_iterations);

// Variational filter with forgetting on the measurement channels; process
// channels are exact Gaussian. Returns the committed hyperparameters.
AdaptiveStepResult vbkf_step(const LinearModel& model, const FilterState& state,
                             const ChannelHyper& hyper, const OptionalInput& u,
                             const VectorXd& y, int vb_iterations);

// Robust filter with per-channel hyperparameter forgetting.
AdaptiveStepResult ar1_step(const LinearModel& model, const FilterState& state,
                            const ChannelHyper& hyper, const OptionalInput& u,
                            const VectorXd& y, LossKind loss_kind,
                            double epsilon, int max_iterations);

// As ar1_step, plus a switching rule: a scale update whose deviation from the
// predicted scale exceeds threshold_xi is treated as outlier-driven and
// reverted to the previous committed value.
AdaptiveStepResult ar2_step(const LinearModel& model, const FilterState& state,
                            const ChannelHyper& hyper, const Ar2Config& cfg,
                            const OptionalInput& u, const VectorXd& y,
                            LossKind loss_kind, double epsilon,
                            int max_iterations);

// eta * sqrt(2 nu^2 / (nu+1)^3) * tau2: eta standard deviations of the
// Gaussian approximation to the scale posterior.
double threshold_xi(double eta, double nu, double tau2);

// ---------------------------------------------------------------------------
// Configured estimator front end (streaming and benchmark harness surface).

enum class EstimatorKind { Kf, Stkf, VbkfFixed, Vbkf, StkfAr1, StkfAr2 };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& s);

struct ChannelConfig {
  double nu = kGaussianNu;
  double tau2 = 1.0;
  double rho = 1.0;
};

struct FilterConfig {
  std::string name;  // panel label; defaults to the estimator kind
  EstimatorKind estimator = EstimatorKind::Kf;
  LossKind loss = LossKind::StudentLog;
  std::vector<ChannelConfig> channels;  // length n+m (vbkf kinds: last m used)
  double epsilon = 0.01;
  int max_iterations = 4;
  int vb_iterations = 4;
  double eta = 1.0;

  std::string label() const { return name.empty() ? to_string(estimator) : name; }
  void validate(int n, int m) const;

  nlohmann::json to_json() const;
  static FilterConfig from_json(const nlohmann::json& j);
};

// Owns the mutable filter state for one estimator instance and dispatches
// each measurement to the configured step function. Single-threaded use;
// independent instances may run on different threads.
class Estimator {
 public:
  Estimator(const LinearModel& model, const FilterConfig& config,
            const FilterState& initial);

  StepDiagnostics step(const OptionalInput& u, const VectorXd& y);

  const FilterState& state() const { return state_; }
  const ChannelHyper& hyper() const { return hyper_; }
  const FilterConfig& config() const { return config_; }
  bool emits_reverted() const { return config_.estimator == EstimatorKind::StkfAr2; }

 private:
  LinearModel model_;
  FilterConfig config_;
  FilterState state_;
  ChannelHyper hyper_;
  ChannelLosses losses_;
  Ar2Config ar2_;
};

FilterState default_initial_state(const LinearModel& model);

}  // namespace vrkf
