#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrkf/filters.hpp"
#include "vrkf/statespace.hpp"

#include <nlohmann/json_fwd.hpp>

namespace vrkf {

// A registered simulation scenario: nominal model for the estimators plus the
// true noise processes driving the trajectory generator.
struct Experiment {
  std::string id;       // "example1" | "example2" | "example3"
  int case_id = 1;
  LinearModel model;
  NoiseSpec w_spec;
  NoiseSpec v_spec;
  long N = 1000;
  std::vector<FilterConfig> panel;
};

// Constant-velocity tracker driven by a scalar acceleration noise through the
// input column; case 1 adds measurement outliers, case 2 a time-varying
// measurement variance.
Experiment build_example1(int case_id);

// The same tracker with a step-like measurement variance (0.1 -> 2.5 -> 0.1)
// and a forgetting-factor panel.
Experiment build_example2();

// Torsion-load plant with the unknown load disturbance augmented as a
// random-walk state; three mixed noise scenarios.
Experiment build_example3(int case_id);

Experiment build_experiment(const std::string& id, int case_id);
std::vector<std::pair<std::string, std::vector<int>>> experiment_registry();

// Forgetting factors compared on example2.
const std::vector<double>& example2_rho_sweep();

struct ExperimentConfig {
  std::string experiment_id;
  int case_id = 1;
  std::vector<FilterConfig> panel;  // empty = registered default panel
  std::vector<std::uint64_t> seeds;
  std::optional<long> N;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct EstimatorResult {
  std::string name;
  VectorXd rmse;              // per state, averaged over converged seeds
  double mean_iterations = 0.0;
  long seeds_used = 0;
  long divergences = 0;
  double wall_seconds = 0.0;
};

struct LambdaTraceEntry {
  long k;
  int channel;
  double lambda_est;   // committed scale (adaptive) or inflation (static)
  double lambda_true;  // whitened nominal true variance
};

struct RunResultSet {
  std::vector<EstimatorResult> estimators;
  // Traces for the first seed, keyed by estimator name.
  std::map<std::string, std::vector<LambdaTraceEntry>> lambda_traces;
};

// Simulates one trajectory per seed and runs every panel estimator on the
// same trajectory. Seeds are dispatched to a small thread pool; results do
// not depend on scheduling. Divergent runs are counted and excluded.
RunResultSet run_panel(const Experiment& exp, const ExperimentConfig& cfg,
                       int threads = 0);

// Per-run panel outputs for one seed (exposed for paired-seed analyses).
struct SeedRunOutput {
  std::vector<VectorXd> estimates;     // one per step
  std::vector<int> iterations;
  std::vector<VectorXd> hyper_tau2;    // committed adaptive scales per step
  bool diverged = false;
};

SeedRunOutput run_single(const Experiment& exp, const FilterConfig& cfg,
                         const Trajectory& traj);

VectorXd rmse(const Trajectory& truth, const std::vector<VectorXd>& estimates);

void export_results_csv(const RunResultSet& results, const Experiment& exp,
                        const ExperimentConfig& cfg, const std::string& path);
void export_results_json(const RunResultSet& results, const Experiment& exp,
                         const ExperimentConfig& cfg, const std::string& path);
void export_lambda_traces_csv(const RunResultSet& results, const std::string& path);

}  // namespace vrkf
