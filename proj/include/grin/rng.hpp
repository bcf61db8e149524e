#pragma once

#include <cstdint>

namespace grin {

// Deterministic 64-bit generator used everywhere randomness is needed.
//
// Algorithm (fixed, do not change without bumping the checkpoint version):
//   state initialization: one splitmix64 step over the seed, with the
//     all-zero result remapped to a fixed nonzero constant;
//   stream: xorshift64* (s ^= s>>12; s ^= s<<25; s ^= s>>27;
//     output s * 0x2545F4914F6CDD1D).
//
// The raw u64 stream and the [0,1) doubles derived from it are exact integer
// arithmetic and therefore bit-identical across platforms. Normal draws use
// the Marsaglia polar method and inherit the platform's `log`; on a given
// build they are bit-stable run to run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal, mean 0 / std 1.
  double normal();
  double normal(double mean, double stdev);

  // Uniform integer in [0, bound). bound must be >= 1.
  std::uint64_t below(std::uint64_t bound);

  // Independent stream derived from the original seed; draws on the fork do
  // not advance this generator.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// One step of the splitmix64 mixing function.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace grin
