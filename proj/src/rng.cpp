#include "mspipe/rng.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "mspipe/errors.hpp"

namespace mspipe {

double Rng::normal() {
  // (0,1] for the log argument so it never sees zero.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::uint64_t> Rng::sample_without_replacement(std::uint64_t n,
                                                           std::uint64_t k) {
  if (k > n) fail("sample_without_replacement: k exceeds population size");
  std::unordered_map<std::uint64_t, std::uint64_t> moved;
  std::vector<std::uint64_t> out;
  out.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    std::uint64_t j = i + below(n - i);
    auto jt = moved.find(j);
    std::uint64_t value = (jt == moved.end()) ? j : jt->second;
    auto it = moved.find(i);
    moved[j] = (it == moved.end()) ? i : it->second;
    out.push_back(value);
  }
  return out;
}

}  // namespace mspipe
