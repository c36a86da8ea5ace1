#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "xdd/num/tensor.hpp"

namespace xdd::num {

/// Seeded generator with platform-independent derived distributions
/// (std::uniform_real_distribution output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

/// Stable seed derivation for sub-streams (phase, epoch, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

void fill_uniform(Tensor& t, double bound, Rng& rng);
/// Glorot-uniform: bound sqrt(6 / (fan_in + fan_out)).
void fill_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

Tensor random_tensor(Shape shape, double bound, Rng& rng, bool requires_grad = false);

}  // namespace xdd::num
