#include "vrkf/statespace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vrkf {

namespace {

constexpr double kSymTol = 1e-12;
constexpr double kCovFloor = 1e-30;

// Substream layout inside a trajectory: per-channel normals plus one selector
// stream per noise source (a mixture node at depth d in the spec tree uses
// selector counter k*16+d; nesting deeper than 16 is rejected by validate()).
constexpr std::uint64_t kStreamW = 100;
constexpr std::uint64_t kStreamWSel = 900;
constexpr std::uint64_t kStreamV = 1000;
constexpr std::uint64_t kStreamVSel = 1900;
constexpr int kMaxMixtureDepth = 16;

bool is_symmetric(const MatrixXd& M, double tol) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

void check_covariance(const MatrixXd& M, bool allow_semidefinite, const std::string& what) {
  if (M.rows() != M.cols()) throw std::invalid_argument(what + " is not square");
  if (!is_symmetric(M, kSymTol)) throw std::invalid_argument(what + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  const double min_eig = es.eigenvalues().minCoeff();
  if (allow_semidefinite) {
    if (min_eig < -1e-12 * scale)
      throw std::invalid_argument(what + " is not positive semidefinite");
  } else {
    if (min_eig <= 0.0) throw std::invalid_argument(what + " is not positive definite");
  }
}

// Lower factor L with L L^T = cov; exactly-zero covariances are floored so the
// factorization stays defined.
MatrixXd noise_factor(const MatrixXd& cov) {
  MatrixXd M = cov;
  if (M.isZero(0.0)) M = kCovFloor * MatrixXd::Identity(M.rows(), M.cols());
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  if (es.eigenvalues().minCoeff() < 0.0)
    throw std::runtime_error("noise covariance is not positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

int mixture_depth(const NoiseSpec& spec) {
  if (spec.kind != NoiseSpec::Kind::Mixture) return 0;
  return 1 + std::max(mixture_depth(*spec.nominal), mixture_depth(*spec.outlier));
}

// Resolves the covariance for one draw, consuming the selector stream at the
// counters owned by (k, depth).
MatrixXd resolve_cov(const NoiseSpec& spec, long k, double dt,
                     const CounterRng& selector, int depth) {
  switch (spec.kind) {
    case NoiseSpec::Kind::FixedGaussian:
      return spec.cov;
    case NoiseSpec::Kind::TimeVarying:
      return spec.schedule_multiplier(k, dt) * spec.base_cov;
    case NoiseSpec::Kind::Mixture: {
      const double u = selector.uniform_at(static_cast<std::uint64_t>(k) * kMaxMixtureDepth + depth);
      const NoiseSpec& branch = (u < spec.epsilon) ? *spec.nominal : *spec.outlier;
      return resolve_cov(branch, k, dt, selector, depth + 1);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

void LinearModel::validate() const {
  const int nn = n();
  const int mm = m();
  if (A.rows() != nn || A.cols() != nn) throw std::invalid_argument("A must be n x n");
  if (C.cols() != nn) throw std::invalid_argument("C must be m x n");
  if (B_u && B_u->rows() != nn) throw std::invalid_argument("B_u must have n rows");
  if (Q.rows() != nn) throw std::invalid_argument("Q must be n x n");
  if (R.rows() != mm) throw std::invalid_argument("R must be m x m");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  check_covariance(Q, /*allow_semidefinite=*/true, "Q");
  check_covariance(R, /*allow_semidefinite=*/false, "R");
}

std::string to_string(ScheduleId id) {
  switch (id) {
    case ScheduleId::SinAbs: return "sin_abs";
    case ScheduleId::SinSq: return "sin_sq";
    case ScheduleId::Step: return "step";
  }
  throw std::logic_error("unreachable");
}

ScheduleId schedule_from_string(const std::string& s) {
  if (s == "sin_abs") return ScheduleId::SinAbs;
  if (s == "sin_sq") return ScheduleId::SinSq;
  if (s == "step") return ScheduleId::Step;
  throw std::invalid_argument("unknown schedule id: " + s);
}

int NoiseSpec::dim() const {
  switch (kind) {
    case Kind::FixedGaussian: return static_cast<int>(cov.rows());
    case Kind::TimeVarying: return static_cast<int>(base_cov.rows());
    case Kind::Mixture: return nominal->dim();
  }
  throw std::logic_error("unreachable");
}

void NoiseSpec::validate() const {
  switch (kind) {
    case Kind::FixedGaussian:
      check_covariance(cov, /*allow_semidefinite=*/true, "noise covariance");
      return;
    case Kind::TimeVarying: {
      check_covariance(base_cov, /*allow_semidefinite=*/true, "base covariance");
      if (schedule == ScheduleId::Step) {
        if (levels.size() != switch_indices.size() + 1)
          throw std::invalid_argument("step schedule needs one more level than switch index");
        for (size_t i = 0; i + 1 < switch_indices.size(); ++i)
          if (switch_indices[i] >= switch_indices[i + 1])
            throw std::invalid_argument("step schedule switch indices must be strictly increasing");
        for (double lvl : levels)
          if (lvl < 0.0) throw std::invalid_argument("step schedule levels must be nonnegative");
      }
      return;
    }
    case Kind::Mixture: {
      if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("mixture epsilon must lie in (0, 1]");
      if (!nominal || !outlier) throw std::invalid_argument("mixture branches missing");
      nominal->validate();
      outlier->validate();
      if (nominal->dim() != outlier->dim())
        throw std::invalid_argument("mixture branch dimensions differ");
      if (mixture_depth(*this) > kMaxMixtureDepth)
        throw std::invalid_argument("mixture nesting too deep");
      return;
    }
  }
}

double NoiseSpec::schedule_multiplier(long k, double dt) const {
  switch (schedule) {
    case ScheduleId::SinAbs: {
      const double t = static_cast<double>(k) * dt;
      const double s = 1.0 + 2.0 * std::abs(std::sin(0.1 * M_PI * t));
      return s * s;
    }
    case ScheduleId::SinSq: {
      const double t = static_cast<double>(k) * dt;
      const double s = std::sin(0.04 * M_PI * t);
      return 2.0 * s * s + 1.0;
    }
    case ScheduleId::Step: {
      size_t j = 0;
      while (j < switch_indices.size() && switch_indices[j] <= k) ++j;
      return levels.at(j);
    }
  }
  throw std::logic_error("unreachable");
}

MatrixXd NoiseSpec::nominal_cov(long k, double dt) const {
  switch (kind) {
    case Kind::FixedGaussian: return cov;
    case Kind::TimeVarying: return schedule_multiplier(k, dt) * base_cov;
    case Kind::Mixture: return nominal->nominal_cov(k, dt);
  }
  throw std::logic_error("unreachable");
}

NoiseSpec NoiseSpec::fixed(const MatrixXd& cov) {
  NoiseSpec s;
  s.kind = Kind::FixedGaussian;
  s.cov = cov;
  return s;
}

NoiseSpec NoiseSpec::mixture(double epsilon, NoiseSpec nominal, NoiseSpec outlier) {
  NoiseSpec s;
  s.kind = Kind::Mixture;
  s.epsilon = epsilon;
  s.nominal = std::make_shared<NoiseSpec>(std::move(nominal));
  s.outlier = std::make_shared<NoiseSpec>(std::move(outlier));
  return s;
}

NoiseSpec NoiseSpec::time_varying(ScheduleId id, const MatrixXd& base_cov,
                                  std::vector<long> switches, std::vector<double> levels) {
  NoiseSpec s;
  s.kind = Kind::TimeVarying;
  s.schedule = id;
  s.base_cov = base_cov;
  s.switch_indices = std::move(switches);
  s.levels = std::move(levels);
  return s;
}

namespace {

nlohmann::json matrix_to_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix JSON must be a nonempty array");
  const auto rows = j.size();
  const auto cols = j[0].size();
  MatrixXd M(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw std::invalid_argument("ragged matrix JSON");
    for (size_t c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

}  // namespace

nlohmann::json NoiseSpec::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case Kind::FixedGaussian:
      j["kind"] = "fixed_gaussian";
      j["cov"] = matrix_to_json(cov);
      break;
    case Kind::Mixture:
      j["kind"] = "mixture";
      j["epsilon"] = epsilon;
      j["nominal"] = nominal->to_json();
      j["outlier"] = outlier->to_json();
      break;
    case Kind::TimeVarying:
      j["kind"] = "time_varying";
      j["schedule"] = to_string(schedule);
      j["base_cov"] = matrix_to_json(base_cov);
      if (schedule == ScheduleId::Step) {
        j["switch_indices"] = switch_indices;
        j["levels"] = levels;
      }
      break;
  }
  if (maps_through_input) j["maps_through_input"] = true;
  return j;
}

NoiseSpec NoiseSpec::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  NoiseSpec s;
  if (kind == "fixed_gaussian") {
    s = fixed(matrix_from_json(j.at("cov")));
  } else if (kind == "mixture") {
    s = mixture(j.at("epsilon").get<double>(), from_json(j.at("nominal")),
                from_json(j.at("outlier")));
  } else if (kind == "time_varying") {
    std::vector<long> sw;
    std::vector<double> lv;
    if (j.contains("switch_indices")) sw = j["switch_indices"].get<std::vector<long>>();
    if (j.contains("levels")) lv = j["levels"].get<std::vector<double>>();
    s = time_varying(schedule_from_string(j.at("schedule").get<std::string>()),
                     matrix_from_json(j.at("base_cov")), std::move(sw), std::move(lv));
  } else {
    throw std::invalid_argument("unknown noise kind: " + kind);
  }
  s.maps_through_input = j.value("maps_through_input", false);
  s.validate();
  return s;
}

VectorXd sample_noise(const NoiseSpec& spec, long k, double dt,
                      const CounterRng& selector, const CounterRng& channels) {
  const MatrixXd cov = resolve_cov(spec, k, dt, selector, 0);
  const MatrixXd L = noise_factor(cov);
  VectorXd z(cov.rows());
  // Channel i of this source draws its step-k normal from one shared stream
  // at counter k*dim+i; the per-source stream keeps channels independent.
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z(i) = channels.normal_at(static_cast<std::uint64_t>(k) * z.size() + i);
  return L * z;
}

double sample_student_compound(double nu, double mu, double tau2, CounterRng& rng) {
  if (nu <= 0.0 || tau2 <= 0.0)
    throw std::invalid_argument("student compound sampler needs nu > 0 and tau2 > 0");
  const double lambda = rng.inv_gamma(0.5 * nu, 0.5 * nu * tau2);
  return mu + std::sqrt(lambda) * rng.normal();
}

Trajectory simulate(const LinearModel& model, const NoiseSpec& w_spec,
                    const NoiseSpec& v_spec,
                    const std::vector<VectorXd>& u_seq, const VectorXd& x0,
                    long N, std::uint64_t seed) {
  model.validate();
  w_spec.validate();
  v_spec.validate();
  const int n = model.n();
  const int m = model.m();
  if (x0.size() != n) throw std::invalid_argument("x0 dimension mismatch");
  if (v_spec.dim() != m) throw std::invalid_argument("measurement noise dimension mismatch");
  if (w_spec.maps_through_input) {
    if (!model.B_u) throw std::invalid_argument("maps_through_input needs B_u");
    if (w_spec.dim() != model.B_u->cols())
      throw std::invalid_argument("process noise dimension must match B_u columns");
  } else if (w_spec.dim() != n) {
    throw std::invalid_argument("process noise dimension mismatch");
  }
  if (!u_seq.empty()) {
    if (!model.B_u) throw std::invalid_argument("inputs given but model has no B_u");
    if (static_cast<long>(u_seq.size()) < N)
      throw std::invalid_argument("input sequence shorter than N");
  }

  const CounterRng w_sel(seed, kStreamWSel);
  const CounterRng w_ch(seed, kStreamW);
  const CounterRng v_sel(seed, kStreamVSel);
  const CounterRng v_ch(seed, kStreamV);

  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(N + 1);
  traj.measurements.reserve(N);
  traj.process_noise.reserve(N);
  traj.true_w_cov.reserve(N);
  traj.true_v_cov.reserve(N);
  if (!u_seq.empty()) traj.inputs.assign(u_seq.begin(), u_seq.begin() + N);

  VectorXd x = x0;
  traj.states.push_back(x);
  for (long k = 0; k < N; ++k) {
    VectorXd w = sample_noise(w_spec, k, model.dt, w_sel, w_ch);
    VectorXd w_applied = w_spec.maps_through_input ? VectorXd(*model.B_u * w) : w;
    VectorXd x_next = model.A * x;
    if (!u_seq.empty()) x_next += *model.B_u * u_seq[k];
    x_next += w_applied;
    const VectorXd v = sample_noise(v_spec, k + 1, model.dt, v_sel, v_ch);
    traj.process_noise.push_back(w_applied);
    traj.true_w_cov.push_back(w_spec.nominal_cov(k, model.dt));
    traj.true_v_cov.push_back(v_spec.nominal_cov(k + 1, model.dt));
    traj.measurements.emplace_back(model.C * x_next + v);
    traj.states.push_back(x_next);
    x = x_next;
  }
  return traj;
}

NoiseCase noise_case(int id) {
  const MatrixXd unit = MatrixXd::Identity(1, 1);
  const NoiseSpec gauss1 = NoiseSpec::fixed(unit);
  const NoiseSpec big = NoiseSpec::fixed(400.0 * unit);
  const NoiseSpec sched = NoiseSpec::time_varying(ScheduleId::SinAbs, unit);
  const auto contam = [&](const NoiseSpec& nom) { return NoiseSpec::mixture(0.99, nom, big); };
  switch (id) {
    case 1: return {gauss1, contam(gauss1), "gaussian process, outlier-contaminated measurements"};
    case 2: return {gauss1, sched, "gaussian process, time-varying measurement variance"};
    case 3: return {gauss1, contam(sched), "gaussian process, time-varying + outliers"};
    case 4: return {contam(gauss1), gauss1, "outlier-contaminated process, gaussian measurements"};
    case 5: return {contam(sched), gauss1, "time-varying + outlier process, gaussian measurements"};
    case 6: return {contam(gauss1), sched, "outlier process, time-varying measurements"};
    default: throw std::invalid_argument("noise case id must be 1..6");
  }
}

namespace {

void write_csv_header(std::ofstream& out, int n, int m) {
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= m; ++i) out << ",y_" << i;
  out << "\n";
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const int n = static_cast<int>(traj.states.front().size());
  const int m = traj.measurements.empty() ? 0 : static_cast<int>(traj.measurements.front().size());
  out.precision(17);
  write_csv_header(out, n, m);
  for (long k = 0; k <= traj.steps(); ++k) {
    out << k;
    for (int i = 0; i < n; ++i) out << "," << traj.states[k](i);
    for (int i = 0; i < m; ++i) {
      out << ",";
      if (k >= 1) out << traj.measurements[k - 1](i);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_measurements_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const int m = traj.measurements.empty() ? 0 : static_cast<int>(traj.measurements.front().size());
  out.precision(17);
  out << "k";
  for (int i = 1; i <= m; ++i) out << ",y_" << i;
  out << "\n";
  for (long k = 1; k <= traj.steps(); ++k) {
    out << k;
    for (int i = 0; i < m; ++i) out << "," << traj.measurements[k - 1](i);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::json model_to_json(const LinearModel& model) {
  nlohmann::json j;
  j["A"] = matrix_to_json(model.A);
  if (model.B_u) j["B_u"] = matrix_to_json(*model.B_u);
  j["C"] = matrix_to_json(model.C);
  j["Q"] = matrix_to_json(model.Q);
  j["R"] = matrix_to_json(model.R);
  j["dt"] = model.dt;
  return j;
}

LinearModel model_from_json(const nlohmann::json& j) {
  LinearModel model;
  model.A = matrix_from_json(j.at("A"));
  if (j.contains("B_u")) model.B_u = matrix_from_json(j.at("B_u"));
  model.C = matrix_from_json(j.at("C"));
  model.Q = matrix_from_json(j.at("Q"));
  model.R = matrix_from_json(j.at("R"));
  model.dt = j.value("dt", 1.0);
  model.validate();
  return model;
}

}  // namespace vrkf
