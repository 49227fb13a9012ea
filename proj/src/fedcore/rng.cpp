#include "pqfl/fedcore/rng.hpp"

#include <cmath>
#include <numbers>

namespace pqfl::fedcore {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, SeedTag tag, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pqfl::fedcore
