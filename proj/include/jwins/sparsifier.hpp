#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jwins/random.hpp"
#include "jwins/wavelet.hpp"

namespace jwins {

using Index = std::uint32_t;

/// Importance scores over the coefficient index space. Holds the change of
/// the model that has not been sent yet.
struct Accumulator {
  FlatVector scores;
  bool enabled = true;  // false: each training delta overwrites the scores

  static Accumulator zeros(std::size_t len, bool enabled = true) {
    return Accumulator{FlatVector(len, 0.0), enabled};
  }
};

/// Discrete distribution of the per-round sharing fraction.
struct AlphaDistribution {
  std::vector<double> support;
  std::vector<double> probs;

  static AlphaDistribution uniform(std::vector<double> support);
  /// {10, 15, 20, 25, 30, 40, 100}% with equal probability.
  static AlphaDistribution standard();

  double expected() const;
  void validate() const;
};

struct Selection {
  std::vector<Index> indices;  // strictly increasing
  double alpha_used = 0.0;

  std::size_t k() const { return indices.size(); }
};

/// round-half-up(alpha * len) clamped to [0, len].
std::size_t selection_size(double alpha, std::size_t len);

void accumulate_training_delta(Accumulator& acc, std::span<const double> before,
                               std::span<const double> after, const CoefficientSpace& space);

void accumulate_averaging_delta(Accumulator& acc, std::span<const double> pre_avg,
                                std::span<const double> post_avg, const CoefficientSpace& space);

/// Consumes exactly one draw from rng.
double draw_alpha(const AlphaDistribution& dist, Rng& rng);

/// The K = selection_size(alpha, len) largest |scores|; ties go to the lower
/// index. Expected linear time.
Selection select_topk(std::span<const double> scores, double alpha);

/// K distinct indices uniformly without replacement from a generator seeded
/// with seed. Any holder of (coeff_len, k, seed) regenerates the same set.
Selection select_random_k(std::size_t coeff_len, std::size_t k, std::uint64_t seed);
Selection select_random(std::size_t coeff_len, double alpha, std::uint64_t seed);

void reset_selected(Accumulator& acc, const Selection& sel);

}  // namespace jwins
