// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run with no arguments for all criteria or with a
// criterion number (1..8) for one of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vrkf/bench.hpp"
#include "vrkf/convergence.hpp"
#include "vrkf/filters.hpp"
#include "vrkf/rng.hpp"
#include "vrkf/statespace.hpp"

using namespace vrkf;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (!detail_.empty()) detail_ += "; ";
      detail_ += what;
    }
  }
  void note(const std::string& what) {
    if (!detail_.empty()) detail_ += "; ";
    detail_ += what;
  }
  Outcome outcome() const { return {pass_, detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

ExperimentConfig seeds_config(const std::string& id, int case_id, int n_seeds,
                              std::optional<long> N = std::nullopt) {
  ExperimentConfig cfg;
  cfg.experiment_id = id;
  cfg.case_id = case_id;
  for (int i = 0; i < n_seeds; ++i) cfg.seeds.push_back(1 + static_cast<std::uint64_t>(i));
  cfg.N = N;
  return cfg;
}

const EstimatorResult& by_name(const RunResultSet& rs, const std::string& name) {
  for (const auto& er : rs.estimators)
    if (er.name == name) return er;
  throw std::runtime_error("estimator " + name + " missing from results");
}

double combined_rmse(const EstimatorResult& er) {
  return std::sqrt(er.rmse.squaredNorm() / static_cast<double>(er.rmse.size()));
}

// --- criterion 1: Gaussian-limit recovery of the standard filter -----------

Outcome criterion1() {
  Checker c;
  const Experiment exp = build_example1(1);
  const Trajectory traj = simulate(exp.model, exp.w_spec, exp.v_spec, {},
                                   VectorXd::Zero(2), 1000, 1);
  FilterState kf = default_initial_state(exp.model);
  FilterState st = kf, vb = kf, ar = kf;
  ChannelHyper hyper;
  hyper.nu = VectorXd::Constant(3, kGaussianNu);
  hyper.tau2 = VectorXd::Ones(3);
  hyper.rho = VectorXd::Ones(3);
  ChannelLosses losses;
  for (int i = 0; i < 3; ++i)
    losses.push_back(RobustLoss::checked(LossKind::StudentLog, kGaussianNu, 1.0));
  double worst_st = 0.0, worst_vb = 0.0, worst_ar = 0.0;
  for (long k = 1; k <= traj.steps(); ++k) {
    const VectorXd& y = traj.y(k);
    kf = kf_step(exp.model, kf, std::nullopt, y).state;
    st = stkf_step(exp.model, st, std::nullopt, y, losses, 0.01, 4).state;
    vb = vbkf_fixed_step(exp.model, vb, std::nullopt, y,
                         VectorXd::Constant(1, kGaussianNu), VectorXd::Ones(1), 4).state;
    const auto r = ar1_step(exp.model, ar, hyper, std::nullopt, y,
                            LossKind::StudentLog, 0.01, 4);
    ar = r.state;
    hyper = r.hyper;
    worst_st = std::max(worst_st, (st.x - kf.x).cwiseAbs().maxCoeff());
    worst_vb = std::max(worst_vb, (vb.x - kf.x).cwiseAbs().maxCoeff());
    worst_ar = std::max(worst_ar, (ar.x - kf.x).cwiseAbs().maxCoeff());
  }
  c.require(worst_st < 1e-6, "stkf deviates " + fmt(worst_st));
  c.require(worst_vb < 1e-6, "vbkf_fixed deviates " + fmt(worst_vb));
  c.require(worst_ar < 1e-6, "ar1 deviates " + fmt(worst_ar));
  c.note("max deviations stkf=" + fmt(worst_st) + " vbkf=" + fmt(worst_vb) +
         " ar1=" + fmt(worst_ar));
  return c.outcome();
}

// --- criterion 2: robust filter equals the fixed-prior variational filter --

Outcome criterion2() {
  Checker c;
  const Experiment exp = build_example1(1);
  const RunResultSet rs = run_panel(exp, seeds_config("example1", 1, 50));
  const auto& kf = by_name(rs, "KF");
  const auto& st = by_name(rs, "STKF");
  const auto& vb = by_name(rs, "VBKF-fixed");
  const double rel = std::abs(combined_rmse(st) - combined_rmse(vb)) / combined_rmse(vb);
  c.require(rel <= 0.02, "per-run rmse gap " + fmt(100 * rel) + "%");
  const double imp_st = 1.0 - st.rmse(0) / kf.rmse(0);
  const double imp_vb = 1.0 - vb.rmse(0) / kf.rmse(0);
  c.require(imp_st >= 0.30, "stkf improvement on x1 " + fmt(100 * imp_st) + "%");
  c.require(imp_vb >= 0.30, "vbkf improvement on x1 " + fmt(100 * imp_vb) + "%");
  c.require(st.mean_iterations < 1.5,
            "stkf mean iterations " + fmt(st.mean_iterations));
  c.note("gap=" + fmt(100 * rel) + "% improvements=" + fmt(100 * imp_st) + "%/" +
         fmt(100 * imp_vb) + "% iters=" + fmt(st.mean_iterations) + "/" +
         fmt(vb.mean_iterations));
  return c.outcome();
}

// --- criterion 3: forgetting-factor robust filter equals the adaptive one --

Outcome criterion3() {
  Checker c;
  const Experiment exp = build_example1(2);
  const RunResultSet rs = run_panel(exp, seeds_config("example1", 2, 50));
  const auto& kf = by_name(rs, "KF");
  const auto& ar = by_name(rs, "STKF-AR1");
  const auto& vb = by_name(rs, "VBKF");
  const double rel = std::abs(combined_rmse(ar) - combined_rmse(vb)) / combined_rmse(vb);
  c.require(rel <= 0.02, "per-run rmse gap " + fmt(100 * rel) + "%");
  for (int i = 0; i < 2; ++i) {
    const double imp_ar = 1.0 - ar.rmse(i) / kf.rmse(i);
    const double imp_vb = 1.0 - vb.rmse(i) / kf.rmse(i);
    c.require(imp_ar >= 0.20, "ar1 improvement on x" + std::to_string(i + 1) + " " +
                                  fmt(100 * imp_ar) + "%");
    c.require(imp_vb >= 0.20, "vbkf improvement on x" + std::to_string(i + 1) + " " +
                                  fmt(100 * imp_vb) + "%");
  }
  c.note("gap=" + fmt(100 * rel) + "% ar1=(" + fmt(ar.rmse(0)) + "," + fmt(ar.rmse(1)) +
         ") vbkf=(" + fmt(vb.rmse(0)) + "," + fmt(vb.rmse(1)) + ") kf=(" +
         fmt(kf.rmse(0)) + "," + fmt(kf.rmse(1)) + ")");
  return c.outcome();
}

// --- criterion 4: steady-state statistics of the tracked scale -------------

Outcome criterion4() {
  Checker c;
  // Low-gain scalar model: posterior term small against the unit measurement
  // channel, the regime the steady-state formulas address.
  LinearModel model;
  model.A = 0.95 * MatrixXd::Identity(1, 1);
  model.C = MatrixXd::Identity(1, 1);
  model.Q = 1e-3 * MatrixXd::Identity(1, 1);
  model.R = MatrixXd::Identity(1, 1);

  for (double rho : {0.97, 0.98, 0.99}) {
    const long N = 50000, burn = 5000;
    CounterRng wrng(91, 0), vrng(91, 1);
    FilterState st = default_initial_state(model);
    ChannelHyper hyper;
    hyper.nu = (VectorXd(2) << kGaussianNu, 1.0 / (1.0 - rho)).finished();
    hyper.tau2 = VectorXd::Ones(2);
    hyper.rho = (VectorXd(2) << 1.0, rho).finished();
    double x_true = 0.0;
    std::vector<double> lam;
    lam.reserve(N - burn);
    double wpw_acc = 0.0;
    long wpw_count = 0;
    for (long k = 1; k <= N; ++k) {
      x_true = 0.95 * x_true + std::sqrt(1e-3) * wrng.normal();
      const VectorXd y = VectorXd::Constant(1, x_true + vrng.normal());
      const auto r = ar1_step(model, st, hyper, std::nullopt, y,
                              LossKind::StudentLog, 0.01, 4);
      st = r.state;
      hyper = r.hyper;
      if (k > burn) {
        lam.push_back(hyper.tau2(1));
        wpw_acc += st.P(0, 0);  // C = R = 1, so [W P W]_rr = P
        ++wpw_count;
      }
    }
    const double wpw = wpw_acc / wpw_count;
    const TrackingPrediction pred = steady_lambda_stats(rho, 1.0, wpw);
    const double mean = std::accumulate(lam.begin(), lam.end(), 0.0) / lam.size();
    double var = 0.0;
    for (double v : lam) var += (v - mean) * (v - mean);
    var /= (lam.size() - 1);
    const double mean_err = std::abs(mean - pred.steady_mean) / pred.steady_mean;
    const double var_err = std::abs(var - pred.steady_var) / pred.steady_var;
    c.require(mean_err <= 0.10, "rho=" + fmt(rho) + " mean error " + fmt(100 * mean_err) + "%");
    c.require(var_err <= 0.15, "rho=" + fmt(rho) + " variance error " + fmt(100 * var_err) + "%");
    c.note("rho=" + fmt(rho) + ": mean " + fmt(mean) + " vs " + fmt(pred.steady_mean) +
           ", var " + fmt(var) + " vs " + fmt(pred.steady_var));
  }
  return c.outcome();
}

// --- criterion 5: transient tracking rate on the step schedule -------------

Outcome criterion5() {
  Checker c;
  const Experiment exp = build_example2();
  const int n_seeds = 60;
  const long N = 6000;
  for (double rho : example2_rho_sweep()) {
    std::vector<double> mean_lambda(N, 0.0);
    for (int s = 0; s < n_seeds; ++s) {
      const Trajectory traj = simulate(exp.model, exp.w_spec, exp.v_spec, {},
                                       VectorXd::Zero(2), N, 500 + s);
      FilterState st = default_initial_state(exp.model);
      ChannelHyper hyper;
      hyper.nu = (VectorXd(3) << kGaussianNu, kGaussianNu, 1.0 / (1.0 - rho)).finished();
      hyper.tau2 = VectorXd::Ones(3);
      hyper.rho = (VectorXd(3) << 1.0, 1.0, rho).finished();
      for (long k = 1; k <= N; ++k) {
        const auto r = ar1_step(exp.model, st, hyper, std::nullopt, traj.y(k),
                                LossKind::StudentLog, 0.01, 4);
        st = r.state;
        hyper = r.hyper;
        mean_lambda[k - 1] += hyper.tau2(2);
      }
    }
    for (double& v : mean_lambda) v /= n_seeds;

    double lam1 = 0.0, lam2 = 0.0;
    for (long k = 1500; k < 2000; ++k) lam1 += mean_lambda[k];
    lam1 /= 500;
    for (long k = 3400; k < 3950; ++k) lam2 += mean_lambda[k];
    lam2 /= 550;
    const double delta0 = lam2 - lam1;

    // decay-rate fit on log(lam2 - mean_lambda) right after the jump
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long count = 0;
    const double tau = time_constant(rho);
    for (long p = 1; p <= static_cast<long>(5 * tau) && 2000 + p <= 3400; ++p) {
      const double delta = lam2 - mean_lambda[2000 - 1 + p];
      if (delta < 0.1 * delta0) break;
      const double x = static_cast<double>(p), y = std::log(delta);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
      ++count;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    const double rho_hat = std::exp(slope);
    const double rate_err = std::abs(rho_hat - rho) / rho;
    c.require(rate_err <= 0.10, "rho=" + fmt(rho) + " fitted decay " + fmt(rho_hat));

    // 63% rise point
    const double target = lam1 + (1.0 - std::exp(-1.0)) * delta0;
    long cross = 0;
    for (long k = 2000; k < 3400; ++k) {
      if (mean_lambda[k] >= target) {
        cross = k - 2000 + 1;
        break;
      }
    }
    const double cross_err = std::abs(cross - tau) / tau;
    c.require(cross > 0 && cross_err <= 0.20,
              "rho=" + fmt(rho) + " 63% crossing at " + std::to_string(cross) +
                  " vs tau " + fmt(tau));
    c.note("rho=" + fmt(rho) + ": rate " + fmt(rho_hat) + ", crossing " +
           std::to_string(cross) + " vs " + fmt(tau));
  }
  return c.outcome();
}

// --- criterion 6: mixed-noise benchmark orderings and bands ----------------

Outcome criterion6() {
  Checker c;
  const auto band = [&](const char* what, double value, double anchor) {
    const double rel = std::abs(value - anchor) / anchor;
    c.require(rel <= 0.25, std::string(what) + " " + fmt(value) + " vs anchor " +
                               fmt(anchor) + " (" + fmt(100 * rel) + "%)");
  };

  {
    const RunResultSet rs = run_panel(build_example3(1), seeds_config("example3", 1, 50));
    const auto& kf = by_name(rs, "KF");
    const auto& ar = by_name(rs, "STKF-AR1");
    const auto& vb = by_name(rs, "VBKF");
    c.require(ar.rmse(0) < kf.rmse(0) && kf.rmse(0) < vb.rmse(0),
              "case1 x1 ordering ar1=" + fmt(ar.rmse(0)) + " kf=" + fmt(kf.rmse(0)) +
                  " vbkf=" + fmt(vb.rmse(0)));
    band("case1 ar1 x1", ar.rmse(0), 0.507);
    band("case1 kf x1", kf.rmse(0), 0.604);
    band("case1 vbkf x1", vb.rmse(0), 0.710);
    c.note("case1 x1: " + fmt(ar.rmse(0)) + " < " + fmt(kf.rmse(0)) + " < " + fmt(vb.rmse(0)));
  }
  {
    const RunResultSet rs = run_panel(build_example3(2), seeds_config("example3", 2, 50));
    const auto& kf = by_name(rs, "KF");
    const auto& ar = by_name(rs, "STKF-AR1");
    const auto& vb = by_name(rs, "VBKF");
    for (int i = 1; i < 5; ++i) {
      const double best = std::min(kf.rmse(i), vb.rmse(i));
      c.require(ar.rmse(i) <= 1.05 * best,
                "case2 x" + std::to_string(i + 1) + " ar1=" + fmt(ar.rmse(i)) +
                    " best-other=" + fmt(best));
    }
    std::ostringstream os;
    os << "case2 ar1/kf/vbkf x2..x5:";
    for (int i = 1; i < 5; ++i)
      os << " " << fmt(ar.rmse(i)) << "/" << fmt(kf.rmse(i)) << "/" << fmt(vb.rmse(i));
    c.note(os.str());
  }
  {
    const RunResultSet rs = run_panel(build_example3(3), seeds_config("example3", 3, 50));
    const auto& kf = by_name(rs, "KF");
    const auto& ar = by_name(rs, "STKF-AR2");
    for (int i = 0; i < 5; ++i) {
      const double imp = 1.0 - ar.rmse(i) / kf.rmse(i);
      c.require(imp >= 0.25, "case3 x" + std::to_string(i + 1) + " improvement " +
                                 fmt(100 * imp) + "%");
    }
    band("case3 ar2 x1", ar.rmse(0), 0.203);
    band("case3 kf x1", kf.rmse(0), 0.359);
    c.note("case3 x1 ar2=" + fmt(ar.rmse(0)) + " kf=" + fmt(kf.rmse(0)));
  }
  return c.outcome();
}

// --- criterion 7: fixed-point convergence machinery ------------------------

Outcome criterion7() {
  Checker c;
  CounterRng rng(2718, 0);
  int tested = 0;
  int ball_violations = 0, contraction_violations = 0;
  while (tested < 100) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3);
    const int m = 1 + static_cast<int>(rng.next_u64() % 3);
    BoundInputs inp;
    inp.W.resize(n + m, n);
    inp.t.resize(n + m);
    for (int i = 0; i < n + m; ++i) {
      inp.t(i) = rng.normal();
      for (int j = 0; j < n; ++j) inp.W(i, j) = rng.normal();
    }
    inp.tau2 = VectorXd::Ones(n + m);
    inp.eta = 0.9;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(inp.W.transpose() * inp.W);
    if (es.eigenvalues().minCoeff() < 1e-3) continue;
    if (inp.t.cwiseAbs().minCoeff() < 1e-3) continue;
    const double xi = xi_lower_bound(inp);
    if (!(xi > 0.0)) continue;
    inp.gamma = 2.0 * xi;
    double nu_req;
    try {
      nu_req = nu_required(inp);
    } catch (const std::exception&) {
      continue;
    }
    if (nu_req > 1e11) continue;
    ++tested;
    ChannelLosses losses;
    for (int i = 0; i < n + m; ++i)
      losses.push_back(RobustLoss::checked(LossKind::StudentLog, 2.0 * nu_req, 1.0));
    VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0(i) = rng.normal();
    x0 *= 0.5 * inp.gamma / std::max(x0.lpNorm<1>(), 1e-12);
    const FixedPointRun run = run_fixed_point(inp.W, inp.t, losses, x0, 25);
    for (const auto& it : run.iterates)
      if (it.lpNorm<1>() > inp.gamma + 1e-9) ++ball_violations;
    for (size_t i = 0; i + 1 < run.step_norms.size(); ++i) {
      if (run.step_norms[i] < 1e-13) break;
      if (run.step_norms[i + 1] > inp.eta * run.step_norms[i] + 1e-15)
        ++contraction_violations;
    }
  }
  c.require(ball_violations == 0,
            std::to_string(ball_violations) + " ball violations");
  c.require(contraction_violations == 0,
            std::to_string(contraction_violations) + " contraction violations");

  const ConditionGrid grid = ConditionGrid::standard();
  for (LossKind kind : {LossKind::StudentLog, LossKind::ExponentialWelsch,
                        LossKind::PowerFamily, LossKind::SquareRoot}) {
    const ConditionReport report = check_loss_conditions(kind, grid);
    c.require(report.all_pass(), to_string(kind) + " loss conditions failed");
  }
  c.note("100 random instances, 4 loss families");
  return c.outcome();
}

// --- criterion 8: analytic property suites ----------------------------------

Outcome criterion8() {
  Checker c;

  // finite-difference consistency for weight and iota, all loss families
  for (LossKind kind : {LossKind::StudentLog, LossKind::ExponentialWelsch,
                        LossKind::PowerFamily, LossKind::SquareRoot}) {
    std::vector<double> nus = kind == LossKind::PowerFamily
                                  ? std::vector<double>{0.5, 1.0, 1.9}
                                  : std::vector<double>{0.5, 1.0, 4.0, 100.0};
    double worst_grad = 0.0, worst_iota = 0.0;
    for (double nu : nus) {
      for (double tau2 : {0.5, 1.0, 2.0}) {
        const RobustLoss loss{kind, nu, tau2};
        for (double e = -10.0; e <= 10.0; e += 0.25) {
          if (std::abs(e) < 1e-3) continue;
          const double h = 1e-6;
          const double fd_J =
              (loss_value(loss, e + h) - loss_value(loss, e - h)) / (2 * h);
          worst_grad = std::max(worst_grad, std::abs(fd_J - influence(loss, e)) /
                                                std::max(1e-12, std::abs(fd_J)));
          const double fd_d = (weight(loss, e + h) - weight(loss, e - h)) / (2 * h);
          worst_iota = std::max(worst_iota, std::abs(fd_d - iota(loss, e) * e) /
                                                std::max(1e-9, std::abs(fd_d)));
        }
      }
    }
    c.require(worst_grad < 1e-6, to_string(kind) + " gradient check " + fmt(worst_grad));
    c.require(worst_iota < 1e-5, to_string(kind) + " iota check " + fmt(worst_iota));
  }

  // compound sampler: t variance and chi-square marginal agreement
  {
    CounterRng rng(3141, 0);
    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i) xs.push_back(sample_student_compound(5.0, 0.0, 1.0, rng));
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= (xs.size() - 1);
    c.require(std::abs(var - 5.0 / 3.0) / (5.0 / 3.0) < 0.05,
              "compound variance " + fmt(var));
    for (double nu : {1.0, 4.0, 100.0}) {
      CounterRng r2(777, static_cast<std::uint64_t>(nu));
      const int n = 100000, bins = 30;
      std::vector<long> counts(bins + 2, 0);
      for (int i = 0; i < n; ++i) {
        const double x = sample_student_compound(nu, 0.0, 1.0, r2);
        if (x < -6.0)
          ++counts.front();
        else if (x >= 6.0)
          ++counts.back();
        else
          ++counts[1 + static_cast<int>((x + 6.0) / (12.0 / bins))];
      }
      const auto density = [nu](double x) {
        return std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) /
               std::sqrt(nu * M_PI) * std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0));
      };
      double chi2 = 0.0;
      int dof = 0;
      double interior = 0.0;
      for (int b = 0; b < bins; ++b) {
        double mass = 0.0;
        for (int q = 0; q < 64; ++q) {
          const double x = -6.0 + (b + (q + 0.5) / 64.0) * (12.0 / bins);
          mass += density(x) * (12.0 / bins) / 64.0;
        }
        interior += mass;
        const double expct = mass * n;
        if (expct >= 5.0) {
          chi2 += (counts[1 + b] - expct) * (counts[1 + b] - expct) / expct;
          ++dof;
        }
      }
      const double tail = 0.5 * (1.0 - interior) * n;
      if (tail >= 5.0) {
        chi2 += (counts.front() - tail) * (counts.front() - tail) / tail;
        chi2 += (counts.back() - tail) * (counts.back() - tail) / tail;
        dof += 2;
      }
      const double critical = dof + 2.33 * std::sqrt(2.0 * dof) + 10.0;  // ~1% level
      c.require(chi2 < critical,
                "chi2 " + fmt(chi2) + " at nu=" + fmt(nu) + " (crit " + fmt(critical) + ")");
    }
  }

  // argmin invariance under per-channel scaling on a decoupled instance
  {
    const int n = 3;
    const MatrixXd W = MatrixXd::Identity(n, n);
    VectorXd t(n);
    t << 1.3, -0.4, 2.2;
    ChannelLosses base;
    const std::vector<double> nus{1.0, 2.0, 4.0};
    for (int i = 0; i < n; ++i)
      base.push_back(RobustLoss::checked(LossKind::StudentLog, nus[i], 1.0));
    const FixedPointRun run = run_fixed_point(W, t, base, VectorXd::Constant(n, 0.1), 80);
    const VectorXd x_star = run.iterates.back();
    for (double cshift : {1.0, 3.0}) {
      VectorXd e = t - W * x_star;
      VectorXd d(n);
      for (int i = 0; i < n; ++i)
        d(i) = weight(base[i], e(i)) * (nus[i] + cshift) / nus[i];
      const VectorXd x_scaled = (W.transpose() * d.asDiagonal() * W)
                                    .ldlt()
                                    .solve(W.transpose() * d.asDiagonal() * t);
      c.require((x_scaled - x_star).cwiseAbs().maxCoeff() < 1e-10,
                "argmin moved under c=" + fmt(cshift));
    }
  }

  // convexity boundary sign change
  {
    const RobustLoss loss{LossKind::StudentLog, 4.0, 1.0};
    const double b = convexity_boundary(loss);
    c.require(std::abs(b - 2.0) < 1e-12, "boundary " + fmt(b));
    const double h = 1e-4;
    const auto second = [&](double e) {
      return (loss_value(loss, e + h) - 2.0 * loss_value(loss, e) +
              loss_value(loss, e - h)) / (h * h);
    };
    bool inside_ok = true;
    for (double e = -0.95 * b; e <= 0.95 * b; e += 0.05 * b)
      if (second(e) < -1e-9) inside_ok = false;
    c.require(inside_ok, "second difference negative inside the convex region");
    c.require(second(1.5 * b) < 0.0, "second difference not negative outside");
  }

  // laplace variance formula and quadrature trend
  {
    const auto [mu100, s100] = laplace_gaussian(100.0, 1.0);
    c.require(std::abs(mu100 - 1.0) < 1e-12 &&
                  std::abs(s100 - 20000.0 / 1030301.0) < 1e-12,
              "laplace closed form");
    const auto kl = [](double nu) {
      const auto [mu, s2] = laplace_gaussian(nu, 1.0);
      const double a = 0.5 * nu, b = 0.5 * nu;
      const double log_norm = a * std::log(b) - std::lgamma(a);
      double acc = 0.0;
      const int steps = 20000;
      const double lo = 1e-4, hi = 12.0, h = (hi - lo) / steps;
      for (int i = 0; i < steps; ++i) {
        const double x = lo + (i + 0.5) * h;
        const double logp = log_norm - (a + 1.0) * std::log(x) - b / x;
        const double p = std::exp(logp);
        if (p < 1e-300) continue;
        const double logq =
            -0.5 * std::log(2.0 * M_PI * s2) - 0.5 * (x - mu) * (x - mu) / s2;
        acc += p * (logp - logq) * h;
      }
      return acc;
    };
    c.require(kl(100.0) < kl(10.0), "KL trend");
  }
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"KF recovery at the Gaussian sentinel (1e-6 per step, 1000 steps)", criterion1},
      {"STKF / VBKF-fixed equivalence and outlier-case improvements", criterion2},
      {"STKF-AR1 / VBKF adaptive-tracking equivalence and improvements", criterion3},
      {"steady-state scale statistics (mean 10%, variance 15%)", criterion4},
      {"transient tracking rate and 63% rise point on the step schedule", criterion5},
      {"mixed-noise benchmark orderings and absolute bands", criterion6},
      {"fixed-point contraction bounds and loss-condition checks", criterion7},
      {"loss derivative, sampler, argmin, convexity, and Laplace properties", criterion8},
  };

  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "usage: %s [1..%zu]\n", argv[0], criteria.size());
    return 2;
  }

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<size_t>(only) != i + 1) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu: %s [%.1fs]%s%s\n", out.pass ? "PASS" : "FAIL",
                i + 1, criteria[i].first.c_str(), secs,
                out.detail.empty() ? "" : " -- ", out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
