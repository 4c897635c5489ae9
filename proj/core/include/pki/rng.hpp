#pragma once

#include <cstdint>

namespace pki {

// Purposes for derived random substreams. Each purpose/index pair gets an
// independent SplitMix64 sequence, so reordering one consumer never shifts
// another consumer's draws.
enum class RngStream : std::uint64_t {
  kProjectorInit = 1,
  kClassifierInit = 2,
  kShuffle = 3,
  kSynthCenters = 4,
  kSynthSamples = 5,
  kTestData = 6,
};

// Seed for substream `index` of `purpose` under the root `seed`.
std::uint64_t derive_seed(std::uint64_t seed, RngStream purpose, std::uint64_t index = 0);

// SplitMix64 (Steele, Lea, Flood 2014). 64-bit state, one add and a
// three-step mixer per draw.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; caches the second variate.
  double normal();
  // Uniform integer in [0, n). Rejection-sampled, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pki
