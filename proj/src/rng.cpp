#include "scpseg/rng.hpp"

#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "scpseg/error.hpp"

namespace scpseg {

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_argument, "uniform_index: bound must be positive");
  // Rejection on the largest multiple of bound keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

double Rng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::uint32_t> Rng::sample_without_replacement(std::uint32_t n, std::uint32_t count) {
  if (count > n) throw Error(Errc::sample_too_large, "sample larger than population");
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::uint32_t>(uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace scpseg
