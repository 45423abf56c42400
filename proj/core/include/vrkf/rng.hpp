#pragma once

#include <cstdint>

namespace vrkf {

// Counter-based pseudo-random stream. Each (seed, stream) pair names an
// independent substream; the k-th value of a substream is a pure function of
// (seed, stream, k), so draws can be made statelessly with at() or
// sequentially with next(). Simulations give every noise channel its own
// stream, which keeps trajectories byte-identical when unrelated channels
// are added.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  std::uint64_t at(std::uint64_t counter) const;

  // Uniform on [0, 1).
  double uniform();
  double uniform_at(std::uint64_t counter) const;

  // Standard normal via Box-Muller; consumes two uniforms.
  double normal();
  // Normal draw pinned to a step index: uses counters {2k, 2k+1}.
  double normal_at(std::uint64_t k) const;

  // Gamma(shape, scale=1), Marsaglia-Tsang; consumes a variable number of
  // uniforms, so only the sequential interface is offered.
  double gamma(double shape);
  // Inverse-Gamma(shape, scale): scale / Gamma(shape).
  double inv_gamma(double shape, double scale);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// SplitMix64 finalizer, used for stream-key derivation as well.
std::uint64_t mix64(std::uint64_t z);

}  // namespace vrkf
