#pragma once

#include <string>
#include <vector>

namespace vrkf {

// Families of per-channel robust losses J(e) with weight d(e) = J'(e)/e and
// derivative factor iota(e) = d'(e)/e. All share the bound d(e) <= 1/tau2
// and flatten to the quadratic e^2/(2 tau2) in their Gaussian limit.
enum class LossKind { StudentLog, ExponentialWelsch, PowerFamily, SquareRoot };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// nu at or above this sentinel selects the exact Gaussian branch, avoiding
// overflow in the transcendental forms.
constexpr double kGaussianNu = 1e8;

struct RobustLoss {
  LossKind kind = LossKind::StudentLog;
  double nu = kGaussianNu;
  double tau2 = 1.0;

  bool gaussian() const { return nu >= kGaussianNu; }

  // Validates parameters; PowerFamily requires nu in (0,2), and a request for
  // exactly nu == 2 is remapped to the Gaussian branch (warning reported via
  // the optional out-parameter).
  static RobustLoss checked(LossKind kind, double nu, double tau2,
                            std::string* warning = nullptr);
};

double loss_value(const RobustLoss& loss, double e);
double weight(const RobustLoss& loss, double e);
double iota(const RobustLoss& loss, double e);
double influence(const RobustLoss& loss, double e);

// Convexity edge of the StudentLog loss: sqrt(nu)*tau. The loss is convex on
// [-boundary, boundary] and concave outside.
double convexity_boundary(const RobustLoss& loss);

// One loss per whitened channel; the first n are process channels, the last
// m are measurement channels.
using ChannelLosses = std::vector<RobustLoss>;

}  // namespace vrkf
