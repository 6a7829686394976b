#include "jwins/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jwins/error.hpp"

namespace jwins {
namespace {

FlatVector difference(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size()) {
    throw SparsifierError("model length mismatch");
  }
  FlatVector delta(after.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = after[i] - before[i];
  }
  return delta;
}

void add_into(Accumulator& acc, const FlatVector& coeffs) {
  if (acc.scores.size() != coeffs.size()) {
    throw SparsifierError("accumulator length does not match coefficient space");
  }
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    acc.scores[i] += coeffs[i];
  }
}

}  // namespace

AlphaDistribution AlphaDistribution::uniform(std::vector<double> support) {
  AlphaDistribution dist;
  dist.probs.assign(support.size(), support.empty() ? 0.0 : 1.0 / static_cast<double>(support.size()));
  dist.support = std::move(support);
  return dist;
}

AlphaDistribution AlphaDistribution::standard() {
  return uniform({0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 1.00});
}

double AlphaDistribution::expected() const {
  double mean = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    mean += support[i] * probs[i];
  }
  return mean;
}

void AlphaDistribution::validate() const {
  if (support.empty()) {
    throw SparsifierError("alpha distribution has empty support");
  }
  if (support.size() != probs.size()) {
    throw SparsifierError("alpha support and probabilities differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (!(support[i] > 0.0 && support[i] <= 1.0)) {
      throw SparsifierError("alpha support values must lie in (0, 1]");
    }
    if (!(probs[i] >= 0.0)) {
      throw SparsifierError("alpha probabilities must be nonnegative");
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw SparsifierError("alpha probabilities must sum to 1");
  }
}

std::size_t selection_size(double alpha, std::size_t len) {
  const double raw = std::floor(alpha * static_cast<double>(len) + 0.5);
  if (!(raw > 0.0)) {
    return 0;
  }
  return std::min(len, static_cast<std::size_t>(raw));
}

void accumulate_training_delta(Accumulator& acc, std::span<const double> before,
                               std::span<const double> after, const CoefficientSpace& space) {
  const auto coeffs = space.forward(difference(before, after));
  if (!acc.enabled) {
    if (acc.scores.size() != coeffs.size()) {
      throw SparsifierError("accumulator length does not match coefficient space");
    }
    acc.scores = coeffs;
    return;
  }
  add_into(acc, coeffs);
}

void accumulate_averaging_delta(Accumulator& acc, std::span<const double> pre_avg,
                                std::span<const double> post_avg, const CoefficientSpace& space) {
  add_into(acc, space.forward(difference(pre_avg, post_avg)));
}

double draw_alpha(const AlphaDistribution& dist, Rng& rng) {
  if (dist.support.empty()) {
    throw SparsifierError("alpha distribution has empty support");
  }
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    cumulative += dist.probs[i];
    if (u < cumulative) {
      return dist.support[i];
    }
  }
  // Rounding left u above the last partial sum: take the last value with mass.
  for (std::size_t i = dist.support.size(); i-- > 0;) {
    if (dist.probs[i] > 0.0) {
      return dist.support[i];
    }
  }
  return dist.support.back();
}

Selection select_topk(std::span<const double> scores, double alpha) {
  const std::size_t k = selection_size(alpha, scores.size());
  Selection sel;
  sel.alpha_used = alpha;
  if (k == 0) {
    return sel;
  }
  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), Index{0});
  if (k < scores.size()) {
    auto magnitude = [&](Index i) {
      const double m = std::abs(scores[i]);
      return std::isnan(m) ? -1.0 : m;
    };
    auto ranks_before = [&](Index a, Index b) {
      const double ma = magnitude(a);
      const double mb = magnitude(b);
      return ma > mb || (ma == mb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                     ranks_before);
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  sel.indices = std::move(order);
  return sel;
}

Selection select_random_k(std::size_t coeff_len, std::size_t k, std::uint64_t seed) {
  if (k > coeff_len) {
    throw SparsifierError("selection larger than coefficient space");
  }
  Selection sel;
  sel.alpha_used = coeff_len == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(coeff_len);
  std::vector<Index> pool(coeff_len);
  std::iota(pool.begin(), pool.end(), Index{0});
  if (k < coeff_len) {
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, coeff_len - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
  }
  sel.indices = std::move(pool);
  return sel;
}

Selection select_random(std::size_t coeff_len, double alpha, std::uint64_t seed) {
  auto sel = select_random_k(coeff_len, selection_size(alpha, coeff_len), seed);
  sel.alpha_used = alpha;
  return sel;
}

void reset_selected(Accumulator& acc, const Selection& sel) {
  for (Index i : sel.indices) {
    if (i >= acc.scores.size()) {
      throw SparsifierError("selected index out of range");
    }
  }
  for (Index i : sel.indices) {
    acc.scores[i] = 0.0;
  }
}

}  // namespace jwins
