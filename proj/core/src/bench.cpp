#include "vrkf/bench.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace vrkf {

namespace {

FilterConfig make_config(std::string name, EstimatorKind kind,
                         std::vector<ChannelConfig> channels,
                         double eta = 1.0) {
  FilterConfig cfg;
  cfg.name = std::move(name);
  cfg.estimator = kind;
  cfg.channels = std::move(channels);
  cfg.eta = eta;
  return cfg;
}

std::vector<ChannelConfig> uniform_channels(int count, double nu, double tau2, double rho) {
  return std::vector<ChannelConfig>(static_cast<size_t>(count), ChannelConfig{nu, tau2, rho});
}

LinearModel tracker_model() {
  const double T = 0.01;
  LinearModel model;
  model.A = (MatrixXd(2, 2) << 1.0, T, 0.0, 1.0).finished();
  model.B_u = (MatrixXd(2, 1) << 0.5 * T * T, T).finished();
  model.C = (MatrixXd(1, 2) << 1.0, 0.0).finished();
  model.Q = *model.B_u * model.B_u->transpose();
  model.R = (MatrixXd(1, 1) << 0.1).finished();
  model.dt = T;
  return model;
}

}  // namespace

Experiment build_example1(int case_id) {
  if (case_id != 1 && case_id != 2)
    throw std::invalid_argument("example1 has cases 1 and 2");
  Experiment exp;
  exp.id = "example1";
  exp.case_id = case_id;
  exp.model = tracker_model();
  exp.N = 6000;

  NoiseSpec w = NoiseSpec::fixed(MatrixXd::Identity(1, 1));
  w.maps_through_input = true;
  exp.w_spec = w;

  const MatrixXd unit = MatrixXd::Identity(1, 1);
  if (case_id == 1) {
    exp.v_spec = NoiseSpec::mixture(0.95, NoiseSpec::fixed(0.1 * unit),
                                    NoiseSpec::fixed(10.0 * unit));
    FilterConfig stkf = make_config(
        "STKF", EstimatorKind::Stkf,
        {{kGaussianNu, 1.0, 1.0}, {kGaussianNu, 1.0, 1.0}, {4.0, 1.0, 1.0}});
    FilterConfig vb = make_config("VBKF-fixed", EstimatorKind::VbkfFixed,
                                  {{4.0, 1.0, 1.0}});
    exp.panel = {make_config("KF", EstimatorKind::Kf, {}), stkf, vb};
  } else {
    // Variance follows the (1+2|sin(0.1 pi t)|)^2 profile while every
    // estimator keeps the nominal R = 0.1, so adaptation has something to do.
    exp.v_spec = NoiseSpec::time_varying(ScheduleId::SinAbs, unit);
    FilterConfig ar1 = make_config(
        "STKF-AR1", EstimatorKind::StkfAr1,
        {{kGaussianNu, 1.0, 1.0}, {kGaussianNu, 1.0, 1.0}, {100.0, 1.0, 0.99}});
    FilterConfig vb = make_config("VBKF", EstimatorKind::Vbkf, {{100.0, 1.0, 0.99}});
    exp.panel = {make_config("KF", EstimatorKind::Kf, {}), ar1, vb};
  }
  return exp;
}

const std::vector<double>& example2_rho_sweep() {
  static const std::vector<double> sweep{0.995, 0.99, 0.98, 0.97};
  return sweep;
}

Experiment build_example2() {
  Experiment exp;
  exp.id = "example2";
  exp.case_id = 1;
  exp.model = tracker_model();
  exp.N = 6000;

  NoiseSpec w = NoiseSpec::fixed(MatrixXd::Identity(1, 1));
  w.maps_through_input = true;
  exp.w_spec = w;
  // Measurement variance 0.1 for k <= 2000, 2.5 up to k = 4000, 0.1 after.
  exp.v_spec = NoiseSpec::time_varying(ScheduleId::Step,
                                       (MatrixXd(1, 1) << 0.1).finished(),
                                       {2001, 4001}, {1.0, 25.0, 1.0});

  exp.panel.push_back(make_config("KF", EstimatorKind::Kf, {}));
  for (double rho : example2_rho_sweep()) {
    const double nu0 = 1.0 / (1.0 - rho);
    FilterConfig ar1 = make_config(
        "STKF-AR1(rho=" + std::to_string(rho).substr(0, 5) + ")",
        EstimatorKind::StkfAr1,
        {{kGaussianNu, 1.0, 1.0}, {kGaussianNu, 1.0, 1.0}, {nu0, 1.0, rho}});
    exp.panel.push_back(ar1);
  }
  return exp;
}

Experiment build_example3(int case_id) {
  if (case_id < 1 || case_id > 3)
    throw std::invalid_argument("example3 has cases 1, 2 and 3");
  Experiment exp;
  exp.id = "example3";
  exp.case_id = case_id;
  exp.N = 2000;

  MatrixXd F(4, 4);
  F << 0.9205, 0.0795, 0.0085, 0.0003,
       0.2045, 0.7955, 0.0007, 0.0085,
      -14.3468, 14.3468, 0.6872, 0.0746,
       37.5370, -37.5370, 0.1863, 0.6405;
  const VectorXd G1 = (VectorXd(4) << 0.0826, 0.0031, 15.5568, 1.2100).finished();
  const VectorXd G2 = (VectorXd(4) << 0.0031, 0.2076, 1.2100, 38.7470).finished();
  MatrixXd H(2, 4);
  H << 1, 0, 0, 0,
       0, 1, 0, 0;

  // Unknown load disturbance augmented as a leading random-walk state.
  LinearModel model;
  model.A = MatrixXd::Zero(5, 5);
  model.A(0, 0) = 1.0;
  model.A.block(1, 0, 4, 1) = G2;
  model.A.block(1, 1, 4, 4) = F;
  MatrixXd B(5, 1);
  B << 0.0, G1(0), G1(1), G1(2), G1(3);
  model.B_u = B;
  model.C = MatrixXd::Zero(2, 5);
  model.C.block(0, 1, 2, 4) = H;
  model.Q = 0.01 * MatrixXd::Identity(5, 5);
  model.R = 0.5 * MatrixXd::Identity(2, 2);
  model.dt = 0.01;
  exp.model = model;

  const MatrixXd Q = model.Q;
  const MatrixXd R = model.R;

  switch (case_id) {
    case 1: {
      // Process covariance bursts to 100 Q during the middle window.
      exp.w_spec = NoiseSpec::time_varying(ScheduleId::Step, Q, {800, 1200},
                                           {1.0, 100.0, 1.0});
      exp.v_spec = NoiseSpec::fixed(R);
      break;
    }
    case 2: {
      // Impulsive plant noise: the physical block takes 900x kicks while the
      // disturbance walk keeps its nominal volatility.
      MatrixXd Q_out = 900.0 * Q;
      Q_out(0, 0) = Q(0, 0);
      exp.w_spec = NoiseSpec::mixture(0.99, NoiseSpec::fixed(Q), NoiseSpec::fixed(Q_out));
      exp.v_spec = NoiseSpec::time_varying(ScheduleId::SinSq, R);
      break;
    }
    case 3: {
      exp.w_spec = NoiseSpec::fixed(Q);
      exp.v_spec = NoiseSpec::mixture(0.99, NoiseSpec::time_varying(ScheduleId::SinSq, R),
                                      NoiseSpec::fixed(900.0 * R));
      break;
    }
  }

  const auto vbkf = make_config("VBKF", EstimatorKind::Vbkf,
                                uniform_channels(2, 50.0, 1.0, 0.98));
  switch (case_id) {
    case 1: {
      auto ch = uniform_channels(5, 100.0, 1.0, 0.98);
      auto meas = uniform_channels(2, kGaussianNu, 1.0, 1.0);
      ch.insert(ch.end(), meas.begin(), meas.end());
      exp.panel = {make_config("KF", EstimatorKind::Kf, {}),
                   make_config("STKF-AR1", EstimatorKind::StkfAr1, ch), vbkf};
      break;
    }
    case 2: {
      auto ch = uniform_channels(5, 3.0, 1.0, 1.0);
      auto meas = uniform_channels(2, 100.0, 1.0, 0.98);
      ch.insert(ch.end(), meas.begin(), meas.end());
      exp.panel = {make_config("KF", EstimatorKind::Kf, {}),
                   make_config("STKF-AR1", EstimatorKind::StkfAr1, ch), vbkf};
      break;
    }
    case 3: {
      auto ch = uniform_channels(5, kGaussianNu, 1.0, 1.0);
      auto meas = uniform_channels(2, 100.0, 1.0, 0.98);
      ch.insert(ch.end(), meas.begin(), meas.end());
      exp.panel = {make_config("KF", EstimatorKind::Kf, {}),
                   make_config("STKF-AR2", EstimatorKind::StkfAr2, ch, 1.0), vbkf};
      break;
    }
  }
  return exp;
}

Experiment build_experiment(const std::string& id, int case_id) {
  if (id == "example1") return build_example1(case_id);
  if (id == "example2") {
    if (case_id != 1) throw std::invalid_argument("example2 has a single case (1)");
    return build_example2();
  }
  if (id == "example3") return build_example3(case_id);
  throw std::invalid_argument("unknown experiment '" + id +
                              "'; known: example1, example2, example3");
}

std::vector<std::pair<std::string, std::vector<int>>> experiment_registry() {
  return {{"example1", {1, 2}}, {"example2", {1}}, {"example3", {1, 2, 3}}};
}

void ExperimentConfig::validate() const {
  build_experiment(experiment_id, case_id);  // throws on unknown combination
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (N && *N < 1) throw std::invalid_argument("N must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment_id;
  j["case"] = case_id;
  j["seeds"] = seeds;
  if (N) j["N"] = *N;
  if (!panel.empty()) {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& cfg : panel) p.push_back(cfg.to_json());
    j["panel"] = std::move(p);
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.experiment_id = j.at("experiment").get<std::string>();
  cfg.case_id = j.value("case", 1);
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("n_seeds")) {
    const auto n = j["n_seeds"].get<long>();
    const auto base = j.value("base_seed", std::uint64_t{1});
    for (long i = 0; i < n; ++i) cfg.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  if (j.contains("N")) cfg.N = j["N"].get<long>();
  if (j.contains("panel"))
    for (const auto& p : j["panel"]) cfg.panel.push_back(FilterConfig::from_json(p));
  return cfg;
}

SeedRunOutput run_single(const Experiment& exp, const FilterConfig& cfg,
                         const Trajectory& traj) {
  SeedRunOutput out;
  const long N = traj.steps();
  out.estimates.reserve(N);
  out.iterations.reserve(N);
  out.hyper_tau2.reserve(N);
  Estimator est(exp.model, cfg, default_initial_state(exp.model));
  const int m = exp.model.m();
  try {
    for (long k = 1; k <= N; ++k) {
      const StepDiagnostics diag = est.step(std::nullopt, traj.y(k));
      out.estimates.push_back(est.state().x);
      out.iterations.push_back(diag.iterations);
      // Committed measurement-channel scales; static estimators report the
      // per-step inflation instead.
      VectorXd tau2(m);
      switch (cfg.estimator) {
        case EstimatorKind::Vbkf:
          tau2 = est.hyper().tau2;
          break;
        case EstimatorKind::StkfAr1:
        case EstimatorKind::StkfAr2:
          tau2 = est.hyper().tau2.tail(m);
          break;
        default:
          tau2 = diag.lambda.tail(m);
          break;
      }
      out.hyper_tau2.push_back(tau2);
    }
  } catch (const DivergenceError&) {
    out.diverged = true;
  }
  return out;
}

VectorXd rmse(const Trajectory& truth, const std::vector<VectorXd>& estimates) {
  if (estimates.empty()) throw std::invalid_argument("no estimates");
  const long N = static_cast<long>(estimates.size());
  VectorXd acc = VectorXd::Zero(estimates.front().size());
  for (long k = 1; k <= N; ++k)
    acc += (estimates[k - 1] - truth.x(k)).cwiseAbs2();
  return (acc / static_cast<double>(N)).cwiseSqrt();
}

RunResultSet run_panel(const Experiment& exp, const ExperimentConfig& cfg, int threads) {
  if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  const std::vector<FilterConfig>& panel = cfg.panel.empty() ? exp.panel : cfg.panel;
  for (const auto& f : panel) f.validate(exp.model.n(), exp.model.m());
  const long N = cfg.N.value_or(exp.N);
  const size_t n_seeds = cfg.seeds.size();
  const size_t n_est = panel.size();

  struct PerSeed {
    std::vector<VectorXd> rmse;       // per estimator
    std::vector<double> iterations;   // mean per estimator
    std::vector<bool> diverged;
    std::vector<double> seconds;
  };
  std::vector<PerSeed> per_seed(n_seeds);

  const VectorXd x0 = VectorXd::Zero(exp.model.n());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t s = next.fetch_add(1);
      if (s >= n_seeds) return;
      const Trajectory traj = simulate(exp.model, exp.w_spec, exp.v_spec, {},
                                       x0, N, cfg.seeds[s]);
      PerSeed& ps = per_seed[s];
      ps.rmse.resize(n_est);
      ps.iterations.assign(n_est, 0.0);
      ps.diverged.assign(n_est, false);
      ps.seconds.assign(n_est, 0.0);
      for (size_t e = 0; e < n_est; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const SeedRunOutput out = run_single(exp, panel[e], traj);
        ps.seconds[e] = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0).count();
        if (out.diverged) {
          ps.diverged[e] = true;
          continue;
        }
        ps.rmse[e] = rmse(traj, out.estimates);
        double it = 0.0;
        for (int v : out.iterations) it += v;
        ps.iterations[e] = it / static_cast<double>(out.iterations.size());
      }
    }
  };

  int n_threads = threads > 0 ? threads
                              : static_cast<int>(std::min<size_t>(
                                    std::max(1u, std::thread::hardware_concurrency()),
                                    n_seeds));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  RunResultSet results;
  results.estimators.resize(n_est);
  for (size_t e = 0; e < n_est; ++e) {
    EstimatorResult& er = results.estimators[e];
    er.name = panel[e].label();
    VectorXd acc = VectorXd::Zero(exp.model.n());
    for (size_t s = 0; s < n_seeds; ++s) {
      er.wall_seconds += per_seed[s].seconds[e];
      if (per_seed[s].diverged[e]) {
        ++er.divergences;
        continue;
      }
      acc += per_seed[s].rmse[e];
      er.mean_iterations += per_seed[s].iterations[e];
      ++er.seeds_used;
    }
    if (er.seeds_used > 0) {
      er.rmse = acc / static_cast<double>(er.seeds_used);
      er.mean_iterations /= static_cast<double>(er.seeds_used);
    } else {
      er.rmse = VectorXd::Zero(exp.model.n());
    }
  }

  // Lambda traces on the first seed, serial (cheap relative to the panel).
  const Trajectory traj = simulate(exp.model, exp.w_spec, exp.v_spec, {}, x0, N,
                                   cfg.seeds.front());
  const int m = exp.model.m();
  for (size_t e = 0; e < n_est; ++e) {
    const SeedRunOutput out = run_single(exp, panel[e], traj);
    if (out.diverged) continue;
    std::vector<LambdaTraceEntry>& trace = results.lambda_traces[panel[e].label()];
    trace.reserve(out.hyper_tau2.size() * m);
    for (long k = 1; k <= static_cast<long>(out.hyper_tau2.size()); ++k) {
      for (int c = 0; c < m; ++c) {
        const double truth =
            traj.true_v_cov[k - 1](c, c) / exp.model.R(c, c);
        trace.push_back({k, c + 1, out.hyper_tau2[k - 1](c), truth});
      }
    }
  }
  return results;
}

namespace {

void write_header(std::ofstream& out, const Experiment& exp, const ExperimentConfig& cfg) {
  nlohmann::json hdr = cfg.to_json();
  if (cfg.panel.empty()) {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& f : exp.panel) p.push_back(f.to_json());
    hdr["panel"] = std::move(p);
  }
  hdr["N"] = cfg.N.value_or(exp.N);
  out << "# config: " << hdr.dump() << "\n";
}

}  // namespace

void export_results_csv(const RunResultSet& results, const Experiment& exp,
                        const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  write_header(out, exp, cfg);
  out << "experiment,case,estimator,state_index,rmse,mean_iterations,seeds,divergences\n";
  for (const auto& er : results.estimators) {
    for (Eigen::Index i = 0; i < er.rmse.size(); ++i) {
      out << exp.id << "," << exp.case_id << "," << er.name << "," << (i + 1)
          << "," << er.rmse(i) << "," << er.mean_iterations << ","
          << er.seeds_used << "," << er.divergences << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void export_results_json(const RunResultSet& results, const Experiment& exp,
                         const ExperimentConfig& cfg, const std::string& path) {
  nlohmann::json j;
  j["config"] = cfg.to_json();
  j["config"]["N"] = cfg.N.value_or(exp.N);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& er : results.estimators) {
    nlohmann::json r;
    r["estimator"] = er.name;
    r["rmse"] = std::vector<double>(er.rmse.data(), er.rmse.data() + er.rmse.size());
    r["mean_iterations"] = er.mean_iterations;
    r["seeds"] = er.seeds_used;
    r["divergences"] = er.divergences;
    r["wall_seconds"] = er.wall_seconds;
    rows.push_back(std::move(r));
  }
  j["results"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

void export_lambda_traces_csv(const RunResultSet& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << "estimator,k,channel,lambda_est,lambda_true\n";
  for (const auto& [name, trace] : results.lambda_traces) {
    for (const auto& entry : trace) {
      out << name << "," << entry.k << "," << entry.channel << ","
          << entry.lambda_est << "," << entry.lambda_true << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace vrkf
