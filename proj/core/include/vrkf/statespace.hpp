#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrkf/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace vrkf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Discrete linear system x_{k+1} = A x_k + B_u u_k + w_k, y_k = C x_k + v_k.
// Q and R are the nominal noise covariances used by the estimators; dt is
// metadata for converting step indices to seconds.
struct LinearModel {
  MatrixXd A;
  std::optional<MatrixXd> B_u;
  MatrixXd C;
  MatrixXd Q;
  MatrixXd R;
  double dt = 1.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(C.rows()); }

  // Throws std::invalid_argument on dimension mismatch, asymmetry beyond
  // 1e-12, indefinite Q, or non-positive-definite R. Q may be singular
  // positive-semidefinite (rank-deficient noise maps produce those).
  void validate() const;
};

enum class ScheduleId { SinAbs, SinSq, Step };

std::string to_string(ScheduleId id);
ScheduleId schedule_from_string(const std::string& s);

// A noise source: plain Gaussian, an epsilon-mixture of two sources, or a
// Gaussian whose covariance follows a deterministic schedule. Mixtures may
// nest over schedules.
struct NoiseSpec {
  enum class Kind { FixedGaussian, Mixture, TimeVarying };

  Kind kind = Kind::FixedGaussian;

  // FixedGaussian
  MatrixXd cov;

  // Mixture: nominal with probability epsilon, outlier otherwise.
  double epsilon = 1.0;
  std::shared_ptr<NoiseSpec> nominal;
  std::shared_ptr<NoiseSpec> outlier;

  // TimeVarying: base_cov scaled by the schedule multiplier at step k.
  ScheduleId schedule = ScheduleId::SinAbs;
  MatrixXd base_cov;
  std::vector<long> switch_indices;  // Step schedule only, strictly increasing.
  std::vector<double> levels;        // levels.size() == switch_indices.size()+1

  // Process noise that enters the state through the model's B_u column map
  // (the draw then has B_u.cols() components instead of n).
  bool maps_through_input = false;

  int dim() const;
  void validate() const;

  // Deterministic schedule multiplier at step k (time t = k*dt).
  double schedule_multiplier(long k, double dt) const;

  // Covariance with mixtures resolved to their nominal branch; this is the
  // "true variance" reference used by covariance-tracking diagnostics.
  MatrixXd nominal_cov(long k, double dt) const;

  static NoiseSpec fixed(const MatrixXd& cov);
  static NoiseSpec mixture(double epsilon, NoiseSpec nominal, NoiseSpec outlier);
  static NoiseSpec time_varying(ScheduleId id, const MatrixXd& base_cov,
                                std::vector<long> switches = {},
                                std::vector<double> levels = {});

  nlohmann::json to_json() const;
  static NoiseSpec from_json(const nlohmann::json& j);
};

// Draws one vector from the spec at step k. Consumes one uniform per mixture
// node (stream `selector`) and one normal per component (stream `channels`),
// with all counters derived from k so that draws are step-addressable.
VectorXd sample_noise(const NoiseSpec& spec, long k, double dt,
                      const CounterRng& selector, const CounterRng& channels);

// One draw from the location-scale Student-t via its scale-mixture form:
// lambda ~ Inv-Gamma(nu/2, nu*tau2/2), then x ~ N(mu, lambda).
double sample_student_compound(double nu, double mu, double tau2, CounterRng& rng);

struct Trajectory {
  std::vector<VectorXd> states;        // x_0 .. x_N
  std::vector<VectorXd> measurements;  // y_1 .. y_N
  std::vector<VectorXd> inputs;        // u_0 .. u_{N-1}, empty if none
  std::vector<VectorXd> process_noise; // applied n-dim noise, x_{k+1}-A x_k-B u_k
  std::vector<MatrixXd> true_w_cov;    // nominal process covariance at k=0..N-1
  std::vector<MatrixXd> true_v_cov;    // nominal measurement covariance at k=1..N
  std::uint64_t seed = 0;

  long steps() const { return static_cast<long>(measurements.size()); }
  const VectorXd& x(long k) const { return states.at(k); }
  const VectorXd& y(long k) const { return measurements.at(k - 1); }
};

Trajectory simulate(const LinearModel& model, const NoiseSpec& w_spec,
                    const NoiseSpec& v_spec,
                    const std::vector<VectorXd>& u_seq, const VectorXd& x0,
                    long N, std::uint64_t seed);

// The catalogue of scalar noise scenarios used for mixed outlier/time-varying
// experiments; id runs 1..6.
struct NoiseCase {
  NoiseSpec w;
  NoiseSpec v;
  std::string description;
};
NoiseCase noise_case(int id);

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_measurements_csv(const Trajectory& traj, const std::string& path);

nlohmann::json model_to_json(const LinearModel& model);
LinearModel model_from_json(const nlohmann::json& j);

}  // namespace vrkf
