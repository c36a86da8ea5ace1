#include "xdd/num/random.hpp"

#include <cmath>
#include <numeric>

namespace xdd::num {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(out[i - 1], out[rng.below(i)]);
  }
  return out;
}

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
}

void fill_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  fill_uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Tensor random_tensor(Shape shape, double bound, Rng& rng, bool requires_grad) {
  auto t = Tensor::zeros(std::move(shape), requires_grad);
  fill_uniform(t, bound, rng);
  return t;
}

}  // namespace xdd::num
