#include "grin/rng.hpp"

#include <cmath>

#include "grin/errors.hpp"

namespace grin {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(splitmix64(seed)) {
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;  // xorshift state must be nonzero
}

std::uint64_t Rng::next_u64() {
  std::uint64_t s = state_;
  s ^= s >> 12;
  s ^= s << 25;
  s ^= s >> 27;
  state_ = s;
  return s * 0x2545F4914F6CDD1DULL;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * m;
  has_cached_normal_ = true;
  return u * m;
}

double Rng::normal(double mean, double stdev) {
  return mean + stdev * normal();
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw GrinError("Rng::below: bound must be >= 1");
  // Multiply-shift maps the full 64-bit draw onto [0, bound).
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ (0xD1B54A32D192ED03ULL * (stream + 1))));
}

}  // namespace grin
