#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace pqfl::fedcore {

// Seed streams derived from the master seed. Every consumer of randomness
// gets its own stream so that adding a consumer never perturbs another.
enum class SeedTag : std::uint64_t {
  kDataset = 1,
  kSplit = 2,
  kInit = 3,
  kTrain = 4,
  kKeys = 5,
  kSigning = 6,
  kAttack = 7,
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, SeedTag tag, std::uint64_t a = 0,
                          std::uint64_t b = 0);

// mt19937_64 with distribution transforms written out here, because the
// standard <random> distributions are implementation-defined and would break
// cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, n), rejection-sampled; n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pqfl::fedcore
