#include "vrkf/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace vrkf {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::StudentLog: return "student_log";
    case LossKind::ExponentialWelsch: return "exponential_welsch";
    case LossKind::PowerFamily: return "power_family";
    case LossKind::SquareRoot: return "square_root";
  }
  throw std::logic_error("unreachable");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "student_log") return LossKind::StudentLog;
  if (s == "exponential_welsch") return LossKind::ExponentialWelsch;
  if (s == "power_family") return LossKind::PowerFamily;
  if (s == "square_root") return LossKind::SquareRoot;
  throw std::invalid_argument("unknown loss kind: " + s);
}

RobustLoss RobustLoss::checked(LossKind kind, double nu, double tau2, std::string* warning) {
  if (!(nu > 0.0)) throw std::invalid_argument("loss nu must be > 0");
  if (!(tau2 > 0.0)) throw std::invalid_argument("loss tau2 must be > 0");
  if (kind == LossKind::PowerFamily && nu < kGaussianNu) {
    if (nu == 2.0) {
      if (warning) *warning = "power_family nu=2 remapped to the Gaussian branch";
      nu = kGaussianNu;
    } else if (nu > 2.0) {
      throw std::invalid_argument("power_family requires nu in (0,2)");
    }
  }
  return RobustLoss{kind, nu, tau2};
}

double loss_value(const RobustLoss& loss, double e) {
  const double nu = loss.nu, tau2 = loss.tau2, e2 = e * e;
  if (loss.gaussian()) return 0.5 * e2 / tau2;
  switch (loss.kind) {
    case LossKind::StudentLog:
      return 0.5 * nu * std::log1p(e2 / (nu * tau2));
    case LossKind::ExponentialWelsch:
      return -nu * nu * std::expm1(-e2 / (2.0 * nu * nu * tau2));
    case LossKind::PowerFamily: {
      const double u = 1.0 + e2 / (tau2 * (2.0 - nu));
      return (2.0 - nu) / nu * (std::pow(u, 0.5 * nu) - 1.0);
    }
    case LossKind::SquareRoot:
      return nu * (std::sqrt(1.0 + e2 / (nu * tau2)) - 1.0);
  }
  throw std::logic_error("unreachable");
}

double weight(const RobustLoss& loss, double e) {
  const double nu = loss.nu, tau2 = loss.tau2, e2 = e * e;
  if (loss.gaussian()) return 1.0 / tau2;
  switch (loss.kind) {
    case LossKind::StudentLog:
      return nu / (nu * tau2 + e2);
    case LossKind::ExponentialWelsch:
      return std::exp(-e2 / (2.0 * nu * nu * tau2)) / tau2;
    case LossKind::PowerFamily: {
      const double u = 1.0 + e2 / (tau2 * (2.0 - nu));
      return std::pow(u, 0.5 * nu - 1.0) / tau2;
    }
    case LossKind::SquareRoot:
      return 1.0 / (tau2 * std::sqrt(1.0 + e2 / (nu * tau2)));
  }
  throw std::logic_error("unreachable");
}

double iota(const RobustLoss& loss, double e) {
  const double nu = loss.nu, tau2 = loss.tau2, e2 = e * e;
  if (loss.gaussian()) return 0.0;
  switch (loss.kind) {
    case LossKind::StudentLog: {
      const double den = nu * tau2 + e2;
      return -2.0 * nu / (den * den);
    }
    case LossKind::ExponentialWelsch:
      return -std::exp(-e2 / (2.0 * nu * nu * tau2)) / (nu * nu * tau2 * tau2);
    case LossKind::PowerFamily: {
      // d'(e)/e of the weight above; the extra 1/2 sometimes quoted with this
      // family does not match the derivative and would fail the
      // finite-difference consistency checks.
      const double u = 1.0 + e2 / (tau2 * (2.0 - nu));
      return -std::pow(u, 0.5 * nu - 2.0) / (tau2 * tau2);
    }
    case LossKind::SquareRoot:
      return -std::pow(1.0 + e2 / (nu * tau2), -1.5) / (nu * tau2 * tau2);
  }
  throw std::logic_error("unreachable");
}

double influence(const RobustLoss& loss, double e) { return weight(loss, e) * e; }

double convexity_boundary(const RobustLoss& loss) {
  if (loss.kind != LossKind::StudentLog)
    throw std::invalid_argument("convexity boundary is defined for the student_log loss");
  return std::sqrt(loss.nu * loss.tau2);
}

}  // namespace vrkf
