#include "vrkf/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace vrkf {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z += kGamma;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ mix64(stream * kGamma + 1))) {}

std::uint64_t CounterRng::at(std::uint64_t counter) const {
  return mix64(key_ + counter * kGamma);
}

std::uint64_t CounterRng::next_u64() { return at(counter_++); }

double CounterRng::uniform_at(std::uint64_t counter) const {
  return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::uniform() { return uniform_at(counter_++); }

double CounterRng::normal_at(std::uint64_t k) const {
  const double u1 = uniform_at(2 * k);
  const double u2 = uniform_at(2 * k + 1);
  // 1-u1 lies in (0,1], keeping the log finite.
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
}

double CounterRng::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back.
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double CounterRng::inv_gamma(double shape, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("inv_gamma scale must be > 0");
  return scale / gamma(shape);
}

}  // namespace vrkf
