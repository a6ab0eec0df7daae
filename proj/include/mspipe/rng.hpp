#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mspipe {

/// Seeded random source with portable output. Only the raw mt19937_64
/// stream is used; uniform/normal/shuffle are implemented here because
/// the standard distributions are not bit-stable across library
/// implementations and every stage of the pipeline must be reproducible
/// from its seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller; one draw consumed per call pair.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  /// k distinct indices uniformly drawn from [0, n) in O(k) memory
  /// (sparse Fisher-Yates). Order of the result is the draw order.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n,
                                                        std::uint64_t k);

 private:
  std::mt19937_64 gen_;
};

}  // namespace mspipe
