#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace jwins {

/// Engine behind every random stream. mt19937_64's output sequence is fixed
/// by the standard; the std:: distributions are not, so the helpers below
/// are used instead of them wherever results must be reproducible.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Order-sensitive hash of a list of words, used to derive independent
/// stream seeds (e.g. {run_seed, node_id, stream_tag}).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words);

/// Uniform integer in [0, bound). bound must be positive.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Uniform real in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Standard normal variate (Box-Muller, two engine draws per call).
double standard_normal(Rng& rng);

// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
  data = 1,
  alpha = 2,
  misc = 3,
  init = 4,
  topology = 5,
  partition = 6,
};

}  // namespace jwins
