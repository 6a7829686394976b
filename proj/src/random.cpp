#include "jwins/random.hpp"

#include <cmath>
#include <numbers>

namespace jwins {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto w : words) {
    h = splitmix64(h ^ splitmix64(w));
  }
  return h;
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  // Draws below threshold are rejected so the accepted range is a multiple
  // of bound: 2^64 mod bound == (-bound) mod bound.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) {
      return r % bound;
    }
  }
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  // u1 in (0, 1] so the log is finite.
  u1 = 1.0 - u1;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace jwins
