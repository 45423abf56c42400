// Command-line front end: run benchmark experiments, sweep parameters,
// stream-filter CSV measurement logs, query fixed-point convergence bounds,
// and validate configuration files.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vrkf/bench.hpp"
#include "vrkf/convergence.hpp"
#include "vrkf/filters.hpp"
#include "vrkf/statespace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitDivergence = 2;

std::uint64_t base_seed() {
  if (const char* env = std::getenv("VRKF_SEED")) {
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return 1;
}

std::vector<std::uint64_t> make_seeds(long count, const std::string& list) {
  std::vector<std::uint64_t> seeds;
  if (!list.empty()) {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
      seeds.push_back(std::strtoull(item.c_str(), nullptr, 10));
    return seeds;
  }
  const std::uint64_t base = base_seed();
  for (long i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  return seeds;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Streams (k, y..., u...) rows through one estimator, writing per-step
// estimates and diagnostics. Shared by `filter` and by `run --trace-dir`.
void stream_filter(vrkf::Estimator& est, std::istream& in, std::ostream& out,
                   int m, int p) {
  const int n = static_cast<int>(est.state().x.size());
  const int l = n + m;
  out.precision(17);
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",iterations";
  for (int i = 1; i <= l; ++i) out << ",lambda_" << i;
  if (est.emits_reverted())
    for (int i = 1; i <= l; ++i) out << ",reverted_" << i;
  out << "\n";

  std::string line;
  long line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header && line.rfind("k,", 0) == 0) {
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) < 1 + m)
      throw std::runtime_error("malformed row at line " + std::to_string(line_no));
    long k = 0;
    Eigen::VectorXd y(m);
    vrkf::OptionalInput u;
    try {
      size_t pos = 0;
      k = std::stol(fields[0], &pos);
      for (int i = 0; i < m; ++i) y(i) = std::stod(fields[1 + i]);
      if (p > 0 && static_cast<int>(fields.size()) >= 1 + m + p) {
        Eigen::VectorXd uv(p);
        for (int i = 0; i < p; ++i) uv(i) = std::stod(fields[1 + m + i]);
        u = uv;
      }
    } catch (const std::exception&) {
      throw std::runtime_error("malformed row at line " + std::to_string(line_no));
    }
    const vrkf::StepDiagnostics diag = est.step(u, y);
    out << k;
    for (int i = 0; i < n; ++i) out << "," << est.state().x(i);
    out << "," << diag.iterations;
    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(l);
    if (diag.lambda.size() == l) {
      lambda = diag.lambda;
    } else if (diag.lambda.size() == m) {
      lambda.tail(m) = diag.lambda;
    }
    for (int i = 0; i < l; ++i) out << "," << lambda(i);
    if (est.emits_reverted()) {
      for (int i = 0; i < l; ++i) {
        const bool rev = i < static_cast<int>(diag.reverted.size()) && diag.reverted[i];
        out << "," << (rev ? 1 : 0);
      }
    }
    out << "\n";
  }
}

int cmd_run(const std::string& experiment, int case_id, long n_seeds,
            const std::string& seed_list, const std::string& out_dir,
            const std::string& trace_dir, const std::string& panel_path,
            std::optional<long> N, const std::string& format) {
  vrkf::Experiment exp = vrkf::build_experiment(experiment, case_id);
  vrkf::ExperimentConfig cfg;
  cfg.experiment_id = experiment;
  cfg.case_id = case_id;
  cfg.seeds = make_seeds(n_seeds, seed_list);
  cfg.N = N;
  if (!panel_path.empty()) {
    const json j = load_json(panel_path);
    for (const auto& p : j.at("panel")) cfg.panel.push_back(vrkf::FilterConfig::from_json(p));
  }
  cfg.validate();

  const vrkf::RunResultSet results = vrkf::run_panel(exp, cfg);

  fs::create_directories(out_dir);
  const std::string stem = experiment + "_case" + std::to_string(case_id);
  if (format == "json") {
    vrkf::export_results_json(results, exp, cfg, out_dir + "/" + stem + "_results.json");
  } else {
    vrkf::export_results_csv(results, exp, cfg, out_dir + "/" + stem + "_results.csv");
  }
  vrkf::export_lambda_traces_csv(results, out_dir + "/" + stem + "_lambda.csv");

  if (!trace_dir.empty()) {
    fs::create_directories(trace_dir);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(exp.model.n());
    const long steps = cfg.N.value_or(exp.N);
    const vrkf::Trajectory traj = vrkf::simulate(exp.model, exp.w_spec, exp.v_spec,
                                                 {}, x0, steps, cfg.seeds.front());
    const std::string meas = trace_dir + "/" + stem + "_measurements.csv";
    vrkf::write_measurements_csv(traj, meas);
    vrkf::write_trajectory_csv(traj, trace_dir + "/" + stem + "_trajectory.csv");
    const auto& panel = cfg.panel.empty() ? exp.panel : cfg.panel;
    for (const auto& fcfg : panel) {
      vrkf::Estimator est(exp.model, fcfg, vrkf::default_initial_state(exp.model));
      std::ifstream in(meas);
      std::ofstream out(trace_dir + "/" + stem + "_" + fcfg.label() + "_estimates.csv");
      stream_filter(est, in, out, exp.model.m(), 0);
    }
  }

  for (const auto& er : results.estimators) {
    std::cout << er.name << ": rmse =";
    for (Eigen::Index i = 0; i < er.rmse.size(); ++i) std::cout << " " << er.rmse(i);
    std::cout << " | mean iterations " << er.mean_iterations << " | seeds "
              << er.seeds_used;
    if (er.divergences > 0) std::cout << " | divergences " << er.divergences;
    std::cout << "\n";
    if (er.divergences > 0) return kExitDivergence;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& param, const std::string& values_csv,
              const std::string& experiment, int case_id, long n_seeds,
              const std::string& out_path) {
  std::vector<double> values;
  {
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) values.push_back(std::stod(item));
    }
  }
  if (values.empty()) throw std::invalid_argument("sweep needs a nonempty value list");

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out.precision(17);

  vrkf::Experiment exp = vrkf::build_experiment(experiment, case_id);
  vrkf::ExperimentConfig cfg;
  cfg.experiment_id = experiment;
  cfg.case_id = case_id;
  cfg.seeds = make_seeds(n_seeds, "");

  json hdr;
  hdr["param"] = param;
  hdr["values"] = values;
  hdr["experiment"] = experiment;
  hdr["case"] = case_id;
  hdr["seeds"] = cfg.seeds;
  out << "# config: " << hdr.dump() << "\n";
  out << "param,value,estimator,armse,mean_iterations\n";

  bool diverged = false;
  for (double value : values) {
    cfg.panel.clear();
    vrkf::FilterConfig fcfg;
    const int n = exp.model.n();
    const int m = exp.model.m();
    if (param == "rho") {
      fcfg.estimator = vrkf::EstimatorKind::StkfAr1;
      fcfg.channels.assign(n, {vrkf::kGaussianNu, 1.0, 1.0});
      for (int i = 0; i < m; ++i)
        fcfg.channels.push_back({1.0 / (1.0 - value), 1.0, value});
      fcfg.name = "STKF-AR1";
    } else if (param == "nu") {
      fcfg.estimator = vrkf::EstimatorKind::Stkf;
      fcfg.channels.assign(n, {vrkf::kGaussianNu, 1.0, 1.0});
      for (int i = 0; i < m; ++i) fcfg.channels.push_back({value, 1.0, 1.0});
      fcfg.name = "STKF";
    } else if (param == "eta") {
      fcfg.estimator = vrkf::EstimatorKind::StkfAr2;
      fcfg.channels.assign(n, {vrkf::kGaussianNu, 1.0, 1.0});
      for (int i = 0; i < m; ++i) fcfg.channels.push_back({100.0, 1.0, 0.98});
      fcfg.eta = value;
      fcfg.name = "STKF-AR2";
    } else {
      throw std::invalid_argument("sweep param must be rho, nu, or eta");
    }
    cfg.panel = {fcfg};
    const vrkf::RunResultSet results = vrkf::run_panel(exp, cfg);
    const auto& er = results.estimators.front();
    if (er.divergences > 0) diverged = true;
    const double armse = er.rmse.size() > 0 ? er.rmse.mean() : 0.0;
    out << param << "," << value << "," << er.name << "," << armse << ","
        << er.mean_iterations << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + out_path);
  return diverged ? kExitDivergence : kExitOk;
}

int cmd_filter(const std::string& config_path, const std::string& input_path,
               const std::string& output_path) {
  const json j = load_json(config_path);
  const vrkf::LinearModel model = vrkf::model_from_json(j.at("model"));
  const vrkf::FilterConfig fcfg = vrkf::FilterConfig::from_json(j.at("filter"));
  fcfg.validate(model.n(), model.m());
  vrkf::Estimator est(model, fcfg, vrkf::default_initial_state(model));

  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot open " + input_path);
  std::ofstream out(output_path);
  if (!out) throw std::runtime_error("cannot open " + output_path + " for writing");
  const int p = model.B_u ? static_cast<int>(model.B_u->cols()) : 0;
  stream_filter(est, in, out, model.m(), p);
  if (!out) throw std::runtime_error("write failed: " + output_path);
  return kExitOk;
}

int cmd_bounds(const std::string& model_path, const std::string& traj_path,
               long first, long last, double gamma_scale, double eta,
               const std::string& nu_csv) {
  const vrkf::LinearModel model = vrkf::model_from_json(load_json(model_path));

  std::ifstream in(traj_path);
  if (!in) throw std::runtime_error("cannot open " + traj_path);
  std::vector<Eigen::VectorXd> ys;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!saw_header && line.rfind("k,", 0) == 0) {
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) < 1 + model.m())
      throw std::runtime_error("measurement row too short");
    Eigen::VectorXd y(model.m());
    for (int i = 0; i < model.m(); ++i) y(i) = std::stod(fields[1 + i]);
    ys.push_back(y);
  }
  if (ys.empty()) throw std::runtime_error("no measurements in " + traj_path);
  if (first < 1) first = 1;
  if (last < first) last = static_cast<long>(ys.size());
  last = std::min<long>(last, static_cast<long>(ys.size()));
  std::vector<Eigen::VectorXd> slice(ys.begin() + (first - 1), ys.begin() + last);

  const vrkf::TrajectoryBounds tb =
      vrkf::scan_trajectory_bounds(model, slice, gamma_scale, eta);
  const double nu_req = std::max(tb.nu_star_max, tb.nu_plus_max);
  std::cout.precision(10);
  std::cout << "steps " << first << ".." << last << " (gamma = " << gamma_scale
            << " * xi, eta = " << eta << ")\n";
  std::cout << "xi_max      = " << tb.xi_max << "\n";
  std::cout << "nu_star_max = " << tb.nu_star_max << "\n";
  std::cout << "nu_plus_max = " << tb.nu_plus_max << "\n";
  std::cout << "nu_required = " << nu_req << " (worst step " << tb.worst_step << ")\n";
  if (!nu_csv.empty()) {
    std::stringstream ss(nu_csv);
    std::string item;
    int channel = 1;
    while (std::getline(ss, item, ',')) {
      const double nu = std::stod(item);
      std::cout << "channel " << channel++ << ": nu = " << nu << " -> "
                << (nu >= nu_req ? "PASS" : "FAIL") << "\n";
    }
  }
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  const json j = load_json(path);
  int checked = 0;
  if (j.contains("experiment")) {
    vrkf::ExperimentConfig cfg = vrkf::ExperimentConfig::from_json(j);
    cfg.validate();
    const vrkf::Experiment exp = vrkf::build_experiment(cfg.experiment_id, cfg.case_id);
    for (const auto& f : cfg.panel) f.validate(exp.model.n(), exp.model.m());
    ++checked;
  }
  if (j.contains("model")) {
    const vrkf::LinearModel model = vrkf::model_from_json(j.at("model"));
    if (j.contains("filter")) {
      const vrkf::FilterConfig fcfg = vrkf::FilterConfig::from_json(j.at("filter"));
      fcfg.validate(model.n(), model.m());
    }
    if (j.contains("w_spec")) {
      const auto spec = vrkf::NoiseSpec::from_json(j.at("w_spec"));
      spec.validate();
    }
    if (j.contains("v_spec")) {
      const auto spec = vrkf::NoiseSpec::from_json(j.at("v_spec"));
      spec.validate();
    }
    ++checked;
  }
  if (checked == 0)
    throw std::invalid_argument("config contains neither 'experiment' nor 'model'");
  std::cout << path << ": OK\n";
  return kExitOk;
}

int cmd_list() {
  for (const auto& [id, cases] : vrkf::experiment_registry()) {
    for (int c : cases) {
      const vrkf::Experiment exp = vrkf::build_experiment(id, c);
      std::cout << id << " case " << c << " (N=" << exp.N << ", n=" << exp.model.n()
                << ", m=" << exp.model.m() << "): panel =";
      for (const auto& f : exp.panel) std::cout << " " << f.label();
      std::cout << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust/adaptive Kalman filtering benchmark harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a registered experiment panel");
  std::string experiment = "example1", seed_list, out_dir = "results",
              trace_dir, panel_path, format = "csv";
  int case_id = 1;
  long n_seeds = 50;
  long steps_override = 0;
  run->add_option("--experiment", experiment, "experiment id")->required();
  run->add_option("--case", case_id, "case id");
  run->add_option("--seeds", n_seeds, "number of Monte Carlo seeds");
  run->add_option("--seed-list", seed_list, "explicit comma-separated seeds");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--trace-dir", trace_dir,
                  "also dump first-seed trajectory and per-step estimates here");
  run->add_option("--panel", panel_path, "JSON file overriding the panel");
  run->add_option("--steps", steps_override, "override trajectory length");
  run->add_option("--format", format, "results format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "sweep one parameter over an experiment");
  std::string param, values_csv, sweep_out = "sweep.csv";
  std::string sweep_experiment = "example1";
  int sweep_case = 1;
  long sweep_seeds = 20;
  sweep->add_option("--param", param, "rho | nu | eta")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--experiment", sweep_experiment, "experiment id");
  sweep->add_option("--case", sweep_case, "case id");
  sweep->add_option("--seeds", sweep_seeds, "number of Monte Carlo seeds");
  sweep->add_option("--out", sweep_out, "output CSV path");

  // filter
  auto* filter = app.add_subcommand("filter", "stream-filter a measurement CSV");
  std::string filter_config, filter_in, filter_out;
  filter->add_option("--config", filter_config, "JSON with model + filter")->required();
  filter->add_option("--input", filter_in, "input CSV (k,y_1..y_m[,u...])")->required();
  filter->add_option("--output", filter_out, "output CSV")->required();

  // bounds
  auto* bounds = app.add_subcommand("bounds", "convergence bounds along a trajectory");
  std::string bounds_model, bounds_traj, nu_csv;
  long first = 1, last = 0;
  double gamma_scale = 2.0, eta = 0.9;
  bounds->add_option("--model", bounds_model, "model JSON")->required();
  bounds->add_option("--trajectory", bounds_traj, "measurement CSV")->required();
  bounds->add_option("--first", first, "first step of the slice");
  bounds->add_option("--last", last, "last step of the slice");
  bounds->add_option("--gamma-scale", gamma_scale, "gamma as a multiple of xi");
  bounds->add_option("--eta", eta, "contraction target in (0,1)");
  bounds->add_option("--nu", nu_csv, "comma-separated channel nu values to check");

  // validate
  auto* validate = app.add_subcommand("validate", "validate a config file");
  std::string validate_path;
  validate->add_option("config", validate_path, "config JSON path")->required();

  // list
  app.add_subcommand("list", "list registered experiments and panels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(experiment, case_id, n_seeds, seed_list, out_dir, trace_dir,
                     panel_path,
                     steps_override > 0 ? std::optional<long>(steps_override)
                                        : std::nullopt,
                     format);
    if (sweep->parsed())
      return cmd_sweep(param, values_csv, sweep_experiment, sweep_case,
                       sweep_seeds, sweep_out);
    if (filter->parsed()) return cmd_filter(filter_config, filter_in, filter_out);
    if (bounds->parsed())
      return cmd_bounds(bounds_model, bounds_traj, first, last, gamma_scale, eta, nu_csv);
    if (validate->parsed()) return cmd_validate(validate_path);
    return cmd_list();
  } catch (const vrkf::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}
