#include "vrkf/filters.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace vrkf {

namespace {

constexpr double kTau2Floor = 1e-12;
constexpr double kIterateNormLimit = 1e12;

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

// Lower-triangular-ish factor B with B B^T = M.
MatrixXd covariance_factor(const MatrixXd& M, const char* what) {
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(M));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error(std::string(what) + " is not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

void predict(const LinearModel& model, const FilterState& state,
             const OptionalInput& u, VectorXd& x_pred, MatrixXd& P_pred) {
  x_pred = model.A * state.x;
  if (u) {
    if (!model.B_u) throw std::invalid_argument("input given but model has no B_u");
    x_pred += *model.B_u * *u;
  }
  P_pred = symmetrize(model.A * state.P * model.A.transpose() + model.Q);
}

void check_dims(const LinearModel& model, const FilterState& state, const VectorXd& y) {
  if (state.x.size() != model.n() || state.P.rows() != model.n())
    throw std::invalid_argument("filter state dimension mismatch");
  if (y.size() != model.m()) throw std::invalid_argument("measurement dimension mismatch");
}

ChannelLosses make_losses(LossKind kind, const VectorXd& nu, const VectorXd& tau2) {
  ChannelLosses losses;
  losses.reserve(nu.size());
  for (Eigen::Index i = 0; i < nu.size(); ++i)
    losses.push_back(RobustLoss::checked(kind, nu(i), tau2(i)));
  return losses;
}

VectorXd whitened_wpw(const MatrixXd& W, const MatrixXd& P) {
  return (W * P * W.transpose()).diagonal();
}

}  // namespace

void ChannelHyper::validate() const {
  if (nu.size() != tau2.size() || nu.size() != rho.size())
    throw std::invalid_argument("hyper parameter arrays must share one length");
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (!(nu(i) > 0.0)) throw std::invalid_argument("hyper nu must be > 0");
    if (!(tau2(i) >= kTau2Floor)) throw std::invalid_argument("hyper tau2 below floor");
    if (!(rho(i) > 0.0 && rho(i) <= 1.0))
      throw std::invalid_argument("hyper rho must lie in (0, 1]");
  }
}

std::optional<std::string> Ar2Config::validate() const {
  if (eta < 0.0) throw std::invalid_argument("ar2 eta must be nonnegative");
  if (eta < 0.25 || eta > 1.0)
    return "ar2 eta outside the advised [0.25, 1] range";
  return std::nullopt;
}

WhitenResult whiten(const VectorXd& x_pred, const MatrixXd& P_pred,
                    const MatrixXd& R_star, const VectorXd& y, const MatrixXd& C) {
  const int n = static_cast<int>(x_pred.size());
  const int m = static_cast<int>(y.size());
  WhitenResult res;
  res.Bp = covariance_factor(P_pred, "prior covariance");
  res.Br = covariance_factor(R_star, "measurement covariance");
  res.t.resize(n + m);
  res.W.resize(n + m, n);
  // Solve rather than invert; Bp, Br are triangular in the LLT case.
  res.t.head(n) = res.Bp.triangularView<Eigen::Lower>().solve(x_pred);
  res.t.tail(m) = res.Br.triangularView<Eigen::Lower>().solve(y);
  res.W.topRows(n) =
      res.Bp.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
  res.W.bottomRows(m) = res.Br.triangularView<Eigen::Lower>().solve(C);
  // Eigen-sqrt fallbacks are dense; redo the solves generically if needed.
  if (!res.t.allFinite() || !res.W.allFinite()) {
    res.t.head(n) = res.Bp.fullPivLu().solve(x_pred);
    res.t.tail(m) = res.Br.fullPivLu().solve(y);
    res.W.topRows(n) = res.Bp.fullPivLu().solve(MatrixXd::Identity(n, n));
    res.W.bottomRows(m) = res.Br.fullPivLu().solve(C);
  }
  return res;
}

RobustUpdateResult robust_update(const VectorXd& t, const MatrixXd& W,
                                 const ChannelLosses& losses,
                                 const VectorXd& x_pred, const MatrixXd& Bp,
                                 const MatrixXd& Br, const MatrixXd& C,
                                 double epsilon, int max_iterations) {
  const int n = static_cast<int>(x_pred.size());
  const int m = static_cast<int>(t.size()) - n;
  if (static_cast<int>(losses.size()) != n + m)
    throw std::invalid_argument("losses must cover all n+m channels");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");

  const VectorXd y = Br * t.tail(m);
  const VectorXd innovation = y - C * x_pred;

  RobustUpdateResult res;
  res.x = x_pred;
  VectorXd weights(n + m);
  for (int it = 1; it <= max_iterations; ++it) {
    const VectorXd e = t - W * res.x;
    for (int i = 0; i < n + m; ++i) weights(i) = weight(losses[i], e(i));
    const MatrixXd P_tilde =
        Bp * weights.head(n).cwiseInverse().asDiagonal() * Bp.transpose();
    const MatrixXd R_tilde =
        Br * weights.tail(m).cwiseInverse().asDiagonal() * Br.transpose();
    const MatrixXd S = C * P_tilde * C.transpose() + R_tilde;
    Eigen::LDLT<MatrixXd> ldlt(symmetrize(S));
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("innovation covariance not invertible");
    const MatrixXd gain = ldlt.solve(C * P_tilde.transpose()).transpose();
    const VectorXd x_new = x_pred + gain * innovation;
    if (!x_new.allFinite() || x_new.norm() > kIterateNormLimit)
      throw DivergenceError("fixed-point iterate diverged");
    res.iterations = it;
    res.gain = gain;
    res.R_tilde = R_tilde;
    const double denom = x_new.norm();
    const double rel = denom > 0.0 ? (x_new - res.x).norm() / denom
                                   : (x_new - res.x).norm();
    res.x = x_new;
    if (rel <= epsilon) break;
  }
  res.e = t - W * res.x;
  res.lambda.resize(n + m);
  for (int i = 0; i < n + m; ++i) res.lambda(i) = 1.0 / weight(losses[i], res.e(i));
  return res;
}

MatrixXd posterior_cov(const MatrixXd& P_pred, const MatrixXd& gain,
                       const MatrixXd& C, const MatrixXd& R) {
  const MatrixXd I = MatrixXd::Identity(P_pred.rows(), P_pred.cols());
  const MatrixXd IKC = I - gain * C;
  return symmetrize(IKC * P_pred * IKC.transpose() + gain * R * gain.transpose());
}

StepResult kf_step(const LinearModel& model, const FilterState& state,
                   const OptionalInput& u, const VectorXd& y) {
  check_dims(model, state, y);
  VectorXd x_pred;
  MatrixXd P_pred;
  predict(model, state, u, x_pred, P_pred);
  const MatrixXd Sm = symmetrize(model.C * P_pred * model.C.transpose() + model.R);
  Eigen::LDLT<MatrixXd> ldlt(Sm);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("innovation covariance not invertible");
  const MatrixXd gain = ldlt.solve(model.C * P_pred.transpose()).transpose();
  const VectorXd innovation = y - model.C * x_pred;

  StepResult out;
  out.state.x = x_pred + gain * innovation;
  out.state.P = posterior_cov(P_pred, gain, model.C, model.R);
  out.diag.iterations = 1;
  out.diag.innovation = innovation;
  out.diag.lambda = VectorXd::Ones(model.n() + model.m());
  out.diag.e = VectorXd::Zero(model.n() + model.m());
  return out;
}

StepResult stkf_step(const LinearModel& model, const FilterState& state,
                     const OptionalInput& u, const VectorXd& y,
                     const ChannelLosses& losses, double epsilon,
                     int max_iterations) {
  check_dims(model, state, y);
  VectorXd x_pred;
  MatrixXd P_pred;
  predict(model, state, u, x_pred, P_pred);
  const WhitenResult w = whiten(x_pred, P_pred, model.R, y, model.C);
  const RobustUpdateResult up =
      robust_update(w.t, w.W, losses, x_pred, w.Bp, w.Br, model.C, epsilon,
                    max_iterations);
  StepResult out;
  out.state.x = up.x;
  out.state.P = posterior_cov(P_pred, up.gain, model.C, up.R_tilde);
  out.diag.iterations = up.iterations;
  out.diag.e = up.e;
  out.diag.lambda = up.lambda;
  out.diag.innovation = y - model.C * x_pred;
  return out;
}

StepResult vbkf_fixed_step(const LinearModel& model, const FilterState& state,
                           const OptionalInput& u, const VectorXd& y,
                           const VectorXd& nu, const VectorXd& tau2,
                           int vb_iterations) {
  check_dims(model, state, y);
  const int m = model.m();
  if (nu.size() != m || tau2.size() != m)
    throw std::invalid_argument("vbkf_fixed needs one (nu, tau2) per measurement channel");
  if (vb_iterations < 1) throw std::invalid_argument("vb_iterations must be >= 1");

  VectorXd x_pred;
  MatrixXd P_pred;
  predict(model, state, u, x_pred, P_pred);
  const MatrixXd Br = covariance_factor(model.R, "measurement covariance");
  const MatrixXd Wr = Br.triangularView<Eigen::Lower>().solve(model.C);
  const VectorXd tr = Br.triangularView<Eigen::Lower>().solve(y);
  const VectorXd innovation = y - model.C * x_pred;

  VectorXd lambda = tau2;
  FilterState post{x_pred, P_pred};
  for (int it = 0; it < vb_iterations; ++it) {
    const MatrixXd R_tilde = Br * lambda.asDiagonal() * Br.transpose();
    const MatrixXd S = symmetrize(model.C * P_pred * model.C.transpose() + R_tilde);
    Eigen::LDLT<MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("innovation covariance not invertible");
    const MatrixXd gain = ldlt.solve(model.C * P_pred.transpose()).transpose();
    post.x = x_pred + gain * innovation;
    if (!post.x.allFinite() || post.x.norm() > kIterateNormLimit)
      throw DivergenceError("variational iterate diverged");
    post.P = posterior_cov(P_pred, gain, model.C, R_tilde);
    const VectorXd e = tr - Wr * post.x;
    const VectorXd wPw = whitened_wpw(Wr, post.P);
    lambda = (nu.cwiseProduct(tau2) + e.cwiseAbs2() + wPw)
                 .cwiseQuotient(nu + VectorXd::Ones(m));
  }

  StepResult out;
  out.state = post;
  out.diag.iterations = vb_iterations;
  out.diag.innovation = innovation;
  out.diag.e = tr - Wr * post.x;
  out.diag.lambda = lambda;
  return out;
}

AdaptiveStepResult vbkf_step(const LinearModel& model, const FilterState& state,
                             const ChannelHyper& hyper, const OptionalInput& u,
                             const VectorXd& y, int vb_iterations) {
  check_dims(model, state, y);
  hyper.validate();
  const int m = model.m();
  if (hyper.channels() != m)
    throw std::invalid_argument("vbkf hyper covers the measurement channels only");

  VectorXd nu_pred = hyper.nu;
  VectorXd tau2_pred = hyper.tau2;
  for (int i = 0; i < m; ++i) {
    if (hyper.rho(i) < 1.0) {
      nu_pred(i) = hyper.rho(i) * hyper.nu(i) + 1.0;
      tau2_pred(i) = std::max(hyper.rho(i) * hyper.tau2(i), kTau2Floor);
    }
  }

  StepResult vb = vbkf_fixed_step(model, state, u, y, nu_pred, tau2_pred, vb_iterations);

  const MatrixXd Br = covariance_factor(model.R, "measurement covariance");
  const MatrixXd Wr = Br.triangularView<Eigen::Lower>().solve(model.C);
  const VectorXd e = vb.diag.e;
  const VectorXd wPw = whitened_wpw(Wr, vb.state.P);

  AdaptiveStepResult out;
  out.state = vb.state;
  out.diag = vb.diag;
  out.hyper = hyper;
  out.hyper.nu = nu_pred;
  for (int i = 0; i < m; ++i) {
    if (hyper.rho(i) < 1.0) {
      out.hyper.tau2(i) =
          std::max(tau2_pred(i) + (e(i) * e(i) + wPw(i)) / nu_pred(i), kTau2Floor);
    }
  }
  return out;
}

namespace {

// Common AR body: hyper prediction, robust update, scale commit. The commit
// policy distinguishes AR1 (always accept) from AR2 (revert when the update
// deviates beyond the switching threshold).
AdaptiveStepResult ar_step_impl(const LinearModel& model, const FilterState& state,
                                const ChannelHyper& hyper, const Ar2Config* cfg,
                                const OptionalInput& u, const VectorXd& y,
                                LossKind loss_kind, double epsilon,
                                int max_iterations) {
  check_dims(model, state, y);
  hyper.validate();
  const int l = model.n() + model.m();
  if (hyper.channels() != l)
    throw std::invalid_argument("hyper must cover all n+m channels");

  VectorXd nu_pred = hyper.nu;
  VectorXd tau2_pred = hyper.tau2;
  for (int i = 0; i < l; ++i) {
    if (hyper.rho(i) < 1.0) {
      nu_pred(i) = hyper.rho(i) * hyper.nu(i) + 1.0;
      tau2_pred(i) = std::max(hyper.rho(i) * hyper.tau2(i), kTau2Floor);
    }
  }

  VectorXd x_pred;
  MatrixXd P_pred;
  predict(model, state, u, x_pred, P_pred);
  const WhitenResult w = whiten(x_pred, P_pred, model.R, y, model.C);
  const ChannelLosses losses = make_losses(loss_kind, nu_pred, tau2_pred);
  const RobustUpdateResult up = robust_update(w.t, w.W, losses, x_pred, w.Bp,
                                              w.Br, model.C, epsilon, max_iterations);

  AdaptiveStepResult out;
  out.state.x = up.x;
  out.state.P = posterior_cov(P_pred, up.gain, model.C, up.R_tilde);
  out.diag.iterations = up.iterations;
  out.diag.e = up.e;
  out.diag.lambda = up.lambda;
  out.diag.innovation = y - model.C * x_pred;
  out.diag.reverted.assign(l, false);

  const VectorXd wPw = whitened_wpw(w.W, out.state.P);
  out.hyper = hyper;
  out.hyper.nu = nu_pred;
  for (int i = 0; i < l; ++i) {
    if (hyper.rho(i) >= 1.0) {
      out.hyper.tau2(i) = tau2_pred(i);
      continue;
    }
    const double candidate =
        tau2_pred(i) + (up.e(i) * up.e(i) + wPw(i)) / nu_pred(i);
    if (cfg && cfg->channel_enabled(i)) {
      const double xi = threshold_xi(cfg->eta, nu_pred(i), tau2_pred(i));
      if (std::abs(candidate - tau2_pred(i)) > xi) {
        out.hyper.tau2(i) = hyper.tau2(i);  // keep the previous committed scale
        out.diag.reverted[i] = true;
        continue;
      }
    }
    out.hyper.tau2(i) = std::max(candidate, kTau2Floor);
  }
  return out;
}

}  // namespace

AdaptiveStepResult ar1_step(const LinearModel& model, const FilterState& state,
                            const ChannelHyper& hyper, const OptionalInput& u,
                            const VectorXd& y, LossKind loss_kind,
                            double epsilon, int max_iterations) {
  return ar_step_impl(model, state, hyper, nullptr, u, y, loss_kind, epsilon,
                      max_iterations);
}

AdaptiveStepResult ar2_step(const LinearModel& model, const FilterState& state,
                            const ChannelHyper& hyper, const Ar2Config& cfg,
                            const OptionalInput& u, const VectorXd& y,
                            LossKind loss_kind, double epsilon,
                            int max_iterations) {
  cfg.validate();
  return ar_step_impl(model, state, hyper, &cfg, u, y, loss_kind, epsilon,
                      max_iterations);
}

double threshold_xi(double eta, double nu, double tau2) {
  if (!(nu > 0.0) || !(tau2 > 0.0))
    throw std::invalid_argument("threshold_xi needs nu > 0 and tau2 > 0");
  const double np1 = nu + 1.0;
  return eta * std::sqrt(2.0 * nu * nu / (np1 * np1 * np1)) * tau2;
}

// ---------------------------------------------------------------------------

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Kf: return "kf";
    case EstimatorKind::Stkf: return "stkf";
    case EstimatorKind::VbkfFixed: return "vbkf_fixed";
    case EstimatorKind::Vbkf: return "vbkf";
    case EstimatorKind::StkfAr1: return "stkf_ar1";
    case EstimatorKind::StkfAr2: return "stkf_ar2";
  }
  throw std::logic_error("unreachable");
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "kf") return EstimatorKind::Kf;
  if (s == "stkf") return EstimatorKind::Stkf;
  if (s == "vbkf_fixed") return EstimatorKind::VbkfFixed;
  if (s == "vbkf") return EstimatorKind::Vbkf;
  if (s == "stkf_ar1") return EstimatorKind::StkfAr1;
  if (s == "stkf_ar2") return EstimatorKind::StkfAr2;
  throw std::invalid_argument("unknown estimator kind: " + s);
}

void FilterConfig::validate(int n, int m) const {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be nonnegative");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (vb_iterations < 1) throw std::invalid_argument("vb_iterations must be >= 1");
  const bool measurement_only =
      estimator == EstimatorKind::VbkfFixed || estimator == EstimatorKind::Vbkf;
  const size_t expected = measurement_only ? static_cast<size_t>(m)
                                           : static_cast<size_t>(n + m);
  if (estimator != EstimatorKind::Kf && channels.size() != expected)
    throw std::invalid_argument("config needs " + std::to_string(expected) +
                                " channel entries, got " +
                                std::to_string(channels.size()));
  for (const auto& ch : channels) {
    RobustLoss::checked(loss, ch.nu, ch.tau2);
    if (!(ch.rho > 0.0 && ch.rho <= 1.0))
      throw std::invalid_argument("channel rho must lie in (0, 1]");
  }
}

nlohmann::json FilterConfig::to_json() const {
  nlohmann::json j;
  if (!name.empty()) j["name"] = name;
  j["estimator"] = to_string(estimator);
  j["loss"] = to_string(loss);
  nlohmann::json chs = nlohmann::json::array();
  for (const auto& ch : channels)
    chs.push_back({{"nu", ch.nu}, {"tau2", ch.tau2}, {"rho", ch.rho}});
  j["channels"] = std::move(chs);
  j["epsilon"] = epsilon;
  j["max_iterations"] = max_iterations;
  j["vb_iterations"] = vb_iterations;
  j["eta"] = eta;
  return j;
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j) {
  FilterConfig cfg;
  cfg.name = j.value("name", std::string());
  cfg.estimator = estimator_kind_from_string(j.at("estimator").get<std::string>());
  if (j.contains("loss")) cfg.loss = loss_kind_from_string(j["loss"].get<std::string>());
  if (j.contains("channels")) {
    for (const auto& ch : j["channels"]) {
      ChannelConfig c;
      c.nu = ch.value("nu", kGaussianNu);
      c.tau2 = ch.value("tau2", 1.0);
      c.rho = ch.value("rho", 1.0);
      cfg.channels.push_back(c);
    }
  }
  cfg.epsilon = j.value("epsilon", 0.01);
  cfg.max_iterations = j.value("max_iterations", 4);
  cfg.vb_iterations = j.value("vb_iterations", 4);
  cfg.eta = j.value("eta", 1.0);
  return cfg;
}

FilterState default_initial_state(const LinearModel& model) {
  return FilterState{VectorXd::Zero(model.n()), MatrixXd::Identity(model.n(), model.n())};
}

Estimator::Estimator(const LinearModel& model, const FilterConfig& config,
                     const FilterState& initial)
    : model_(model), config_(config), state_(initial) {
  model_.validate();
  config_.validate(model_.n(), model_.m());
  const int l = model_.n() + model_.m();
  const bool measurement_only = config_.estimator == EstimatorKind::VbkfFixed ||
                                config_.estimator == EstimatorKind::Vbkf;
  const int count = measurement_only ? model_.m() : l;
  hyper_.nu = VectorXd::Constant(count, kGaussianNu);
  hyper_.tau2 = VectorXd::Ones(count);
  hyper_.rho = VectorXd::Ones(count);
  for (int i = 0; i < count && i < static_cast<int>(config_.channels.size()); ++i) {
    hyper_.nu(i) = config_.channels[i].nu;
    hyper_.tau2(i) = config_.channels[i].tau2;
    hyper_.rho(i) = config_.channels[i].rho;
  }
  if (config_.estimator == EstimatorKind::Stkf) {
    losses_.reserve(l);
    for (int i = 0; i < l; ++i)
      losses_.push_back(RobustLoss::checked(config_.loss, hyper_.nu(i), hyper_.tau2(i)));
  }
  ar2_.eta = config_.eta;
}

StepDiagnostics Estimator::step(const OptionalInput& u, const VectorXd& y) {
  switch (config_.estimator) {
    case EstimatorKind::Kf: {
      StepResult r = kf_step(model_, state_, u, y);
      state_ = r.state;
      return r.diag;
    }
    case EstimatorKind::Stkf: {
      StepResult r = stkf_step(model_, state_, u, y, losses_, config_.epsilon,
                               config_.max_iterations);
      state_ = r.state;
      return r.diag;
    }
    case EstimatorKind::VbkfFixed: {
      StepResult r = vbkf_fixed_step(model_, state_, u, y, hyper_.nu,
                                     hyper_.tau2, config_.vb_iterations);
      state_ = r.state;
      return r.diag;
    }
    case EstimatorKind::Vbkf: {
      AdaptiveStepResult r =
          vbkf_step(model_, state_, hyper_, u, y, config_.vb_iterations);
      state_ = r.state;
      hyper_ = r.hyper;
      return r.diag;
    }
    case EstimatorKind::StkfAr1: {
      AdaptiveStepResult r = ar1_step(model_, state_, hyper_, u, y, config_.loss,
                                      config_.epsilon, config_.max_iterations);
      state_ = r.state;
      hyper_ = r.hyper;
      return r.diag;
    }
    case EstimatorKind::StkfAr2: {
      AdaptiveStepResult r = ar2_step(model_, state_, hyper_, ar2_, u, y,
                                      config_.loss, config_.epsilon,
                                      config_.max_iterations);
      state_ = r.state;
      hyper_ = r.hyper;
      return r.diag;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace vrkf
