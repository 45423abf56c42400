#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "vrkf/losses.hpp"
#include "vrkf/statespace.hpp"

namespace vrkf {

// One whitened regression instance plus the ball radius gamma and contraction
// target eta used by the sufficient-condition bounds.
struct BoundInputs {
  MatrixXd W;     // l x n whitened regressor
  VectorXd t;     // l observations
  VectorXd tau2;  // l channel scales
  double gamma = 1.0;
  double eta = 0.9;

  void validate() const;
};

// Lower bound on admissible gamma: the fixed-point map cannot leave the
// gamma ball for any degrees of freedom once gamma exceeds this.
double xi_lower_bound(const BoundInputs& inp);

// Worst-case iterate-norm bound as a function of the (uniform) degrees of
// freedom; strictly decreasing, tends to xi as nu grows.
double phi(double nu, const BoundInputs& inp);

// Worst-case Jacobian-norm bound; strictly decreasing in nu.
double psi(double nu, const BoundInputs& inp);

// Solve phi(nu) = gamma (requires gamma > xi) / psi(nu) = eta by bisection in
// log-nu over [1e-9, 1e12] to 1e-9 relative residual.
double solve_nu_star(const BoundInputs& inp);
double solve_nu_plus(const BoundInputs& inp);

// max(nu_star, nu_plus): degrees of freedom at or above this make the
// fixed-point iteration a contraction that keeps the gamma ball invariant.
double nu_required(const BoundInputs& inp);

// Scalar loss evaluators, injectable so condition checks can run against
// hypothetical families as well as the built-in kinds.
struct LossFunctions {
  std::function<double(double nu, double tau2, double e)> value;
  std::function<double(double nu, double tau2, double e)> weight;
  std::function<double(double nu, double tau2, double e)> iota;
  // Whether weight(nu, tau2, e) -> 0 as nu -> 0+ for fixed e != 0; families
  // whose maximum-robustness end keeps a positive weight skip that subcheck.
  bool weight_vanishes_at_zero_nu = true;
};

LossFunctions loss_functions(LossKind kind);

struct ConditionGrid {
  std::vector<double> nu{0.5, 1.0, 4.0, 100.0};
  std::vector<double> tau2{0.5, 1.0, 2.0};
  std::vector<double> e;  // filled with a default |e| <= 10 grid when empty

  static ConditionGrid standard();
};

struct ConditionReport {
  struct Item {
    std::string name;
    bool pass = true;
    double worst_value = 0.0;
    double worst_nu = 0.0, worst_tau2 = 0.0, worst_e = 0.0;
  };
  std::vector<Item> items;
  bool all_pass() const;
  std::string summary() const;
};

// Numerically verifies the fixed-point solvability conditions: the loss is
// even, minimized at zero and non-decreasing in |e|; the weight stays within
// (0, 1/tau2], grows with nu and (where applicable) vanishes as nu -> 0+; the
// derivative factor stays bounded on the grid.
ConditionReport check_loss_conditions(const LossFunctions& fns, const ConditionGrid& grid);
ConditionReport check_loss_conditions(LossKind kind, const ConditionGrid& grid);

// Steady-state degrees of freedom reached by the forgetting recursion
// nu <- rho nu + 1.
double steady_dof(double rho);

struct TrackingPrediction {
  double steady_mean = 0.0;
  double steady_var = 0.0;
  double time_constant = 0.0;  // steps
  double transient(double delta0, long p) const;  // delta0 * rho^p
  double rho = 0.0;
};

// Steady-state mean and variance of the tracked scale under a constant true
// channel variance sigma_g and posterior term wPw.
TrackingPrediction steady_lambda_stats(double rho, double sigma_g, double wPw);

double time_constant(double rho);
double transient(double delta0, double rho, long p);

// Gaussian fit (mu, sigma^2) to Inv-Gamma(nu/2, nu tau2/2) by a second-order
// expansion of the log-density at its mode: mu = tau2,
// sigma^2 = 2 nu^2 tau2^2 / (nu+1)^3.
std::pair<double, double> laplace_gaussian(double nu, double tau2);

// One application of the weighted-least-squares fixed-point map
// x -> (W^T D(e) W)^{-1} W^T D(e) t with D the per-channel weights at e = t - W x.
VectorXd fixed_point_map(const MatrixXd& W, const VectorXd& t,
                         const ChannelLosses& losses, const VectorXd& x);

struct FixedPointRun {
  std::vector<VectorXd> iterates;  // includes x0
  std::vector<double> step_norms;  // l1 norms of successive differences
};

FixedPointRun run_fixed_point(const MatrixXd& W, const VectorXd& t,
                              const ChannelLosses& losses, const VectorXd& x0,
                              int iterations);

// Worst-case bound scan along a trajectory: runs a Gaussian filter over the
// measurements, forms the whitened instance at each step, and reports the
// largest xi / nu_star / nu_plus encountered.
struct TrajectoryBounds {
  double xi_max = 0.0;
  double nu_star_max = 0.0;
  double nu_plus_max = 0.0;
  long worst_step = 0;
};

TrajectoryBounds scan_trajectory_bounds(const LinearModel& model,
                                        const std::vector<VectorXd>& measurements,
                                        double gamma_scale, double eta);

}  // namespace vrkf
