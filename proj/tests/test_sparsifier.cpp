#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "jwins/error.hpp"
#include "jwins/sparsifier.hpp"

using namespace jwins;

namespace {

FlatVector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  FlatVector x(n);
  for (auto& v : x) v = scale * standard_normal(rng);
  return x;
}

// Reference TopK: full sort under (|v| desc, index asc).
std::vector<Index> sorted_topk(std::span<const double> v, std::size_t k) {
  std::vector<Index> order(v.size());
  for (Index i = 0; i < v.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(v[a]) > std::abs(v[b]); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

TEST_CASE("selection size rounds half up and clamps") {
  CHECK(selection_size(0.5, 4) == 2);
  CHECK(selection_size(0.37, 10000) == 3700);
  CHECK(selection_size(0.25, 10) == 3);  // 2.5 -> 3
  CHECK(selection_size(1.0, 7) == 7);
  CHECK(selection_size(2.0, 7) == 7);
  CHECK(selection_size(0.0, 7) == 0);
}

TEST_CASE("select_topk") {
  const FlatVector v{3, -5, 2, 0};
  auto sel = select_topk(v, 0.5);
  CHECK(sel.indices == std::vector<Index>{0, 1});
  CHECK(sel.k() == 2);
  CHECK(sel.alpha_used == 0.5);

  CHECK(select_topk(v, 1.0).indices == std::vector<Index>{0, 1, 2, 3});

  const FlatVector tie{1, -1, 1, 0};
  CHECK(select_topk(tie, 0.5).indices == std::vector<Index>{0, 1});
}

TEST_CASE("select_topk agrees with sort-then-take") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_below(rng, 300);
    FlatVector v(n);
    // Coarse values force many ties.
    for (auto& x : v) x = static_cast<double>(static_cast<int>(uniform_below(rng, 9)) - 4);
    const double alpha = 0.05 + 0.95 * uniform01(rng);
    const auto sel = select_topk(v, alpha);
    CHECK(sel.indices == sorted_topk(v, selection_size(alpha, n)));
  }
}

TEST_CASE("select_topk is permutation consistent") {
  Rng rng(4);
  const auto v = random_vector(rng, 100);
  std::vector<Index> perm(100);
  for (Index i = 0; i < 100; ++i) perm[i] = i;
  for (std::size_t i = 99; i > 0; --i) std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
  FlatVector permuted(100);
  for (Index i = 0; i < 100; ++i) permuted[perm[i]] = v[i];

  const auto a = select_topk(v, 0.3);
  const auto b = select_topk(permuted, 0.3);
  std::set<Index> mapped;
  for (Index i : a.indices) mapped.insert(perm[i]);
  CHECK(std::set<Index>(b.indices.begin(), b.indices.end()) == mapped);
}

TEST_CASE("reset then reselect skips zeroed entries") {
  Rng rng(9);
  Accumulator acc{random_vector(rng, 50), true};
  const auto first = select_topk(acc.scores, 0.2);
  reset_selected(acc, first);
  const auto second = select_topk(acc.scores, 0.2);
  for (Index i : second.indices) {
    CHECK(acc.scores[i] != 0.0);
  }
}

TEST_CASE("reset_selected") {
  Accumulator acc{{3, -5, 2}, true};
  reset_selected(acc, Selection{{1}, 0.3});
  CHECK(acc.scores == FlatVector{3, 0, 2});
  reset_selected(acc, Selection{});
  CHECK(acc.scores == FlatVector{3, 0, 2});
  reset_selected(acc, Selection{{0, 1, 2}, 1.0});
  CHECK(acc.scores == FlatVector{0, 0, 0});
  CHECK_THROWS_AS(reset_selected(acc, Selection{{3}, 0.1}), SparsifierError);
}

TEST_CASE("select_random") {
  const auto all = select_random(40, 1.0, 1234);
  CHECK(all.k() == 40);
  CHECK(all.indices.front() == 0);
  CHECK(all.indices.back() == 39);

  const auto a = select_random(10000, 0.37, 99);
  const auto b = select_random(10000, 0.37, 99);
  CHECK(a.k() == 3700);
  CHECK(a.indices == b.indices);
  CHECK(std::adjacent_find(a.indices.begin(), a.indices.end(),
                           [](Index x, Index y) { return x >= y; }) == a.indices.end());
  CHECK(a.indices.back() < 10000);
  CHECK(select_random_k(10000, 3700, 99).indices == a.indices);
  CHECK(select_random(10000, 0.37, 100).indices != a.indices);
}

TEST_CASE("alpha distributions") {
  const auto standard = AlphaDistribution::standard();
  CHECK_NOTHROW(standard.validate());
  CHECK(std::abs(standard.expected() - 2.4 / 7.0) < 1e-12);

  Rng rng(77);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += draw_alpha(standard, rng);
  CHECK(std::abs(sum / draws - 0.342857) < 0.005);

  const AlphaDistribution budget20{{1.0, 0.1}, {0.1, 0.9}};
  CHECK_NOTHROW(budget20.validate());
  CHECK(std::abs(budget20.expected() - 0.19) < 1e-12);
  sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += draw_alpha(budget20, rng);
  CHECK(std::abs(sum / draws - 0.19) < 0.005);

  Rng r1(5), r2(5);
  for (int i = 0; i < 100; ++i) CHECK(draw_alpha(standard, r1) == draw_alpha(standard, r2));

  // One engine draw per call.
  Rng counted(6), reference(6);
  (void)draw_alpha(standard, counted);
  reference.discard(1);
  CHECK(counted() == reference());

  CHECK_THROWS_AS(draw_alpha(AlphaDistribution{}, rng), SparsifierError);
  CHECK_THROWS_AS((AlphaDistribution{{0.5, 1.2}, {0.5, 0.5}}.validate()), SparsifierError);
  CHECK_THROWS_AS((AlphaDistribution{{0.5, 1.0}, {0.5, 0.6}}.validate()), SparsifierError);
  CHECK_THROWS_AS((AlphaDistribution{{0.5}, {0.5, 0.5}}.validate()), SparsifierError);
}

TEST_CASE("training delta accumulation") {
  const auto space = CoefficientSpace::wavelet(sym2_filters(), 64);
  Rng rng(2);
  const auto x = random_vector(rng, 64);

  auto acc = Accumulator::zeros(space.size());
  accumulate_training_delta(acc, x, x, space);
  CHECK(acc.scores == FlatVector(space.size(), 0.0));

  accumulate_training_delta(acc, FlatVector(64, 0.0), x, space);
  const auto cx = dwt(x, sym2_filters()).data;
  for (std::size_t i = 0; i < cx.size(); ++i) CHECK(std::abs(acc.scores[i] - cx[i]) < 1e-12);

  // Two deltas add up to the transform of their sum.
  const auto d1 = random_vector(rng, 64);
  const auto d2 = random_vector(rng, 64);
  FlatVector x1(64), x2(64), sum(64);
  for (std::size_t i = 0; i < 64; ++i) {
    x1[i] = x[i] + d1[i];
    x2[i] = x1[i] + d2[i];
    sum[i] = d1[i] + d2[i];
  }
  auto twice = Accumulator::zeros(space.size());
  accumulate_training_delta(twice, x, x1, space);
  accumulate_training_delta(twice, x1, x2, space);
  const auto expected = dwt(sum, sym2_filters()).data;
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(twice.scores[i] - expected[i]) < 1e-9);

  auto overwrite = Accumulator::zeros(space.size(), false);
  accumulate_training_delta(overwrite, x, x1, space);
  accumulate_training_delta(overwrite, x1, x2, space);
  const auto only_last = dwt(d2, sym2_filters()).data;
  for (std::size_t i = 0; i < only_last.size(); ++i) CHECK(std::abs(overwrite.scores[i] - only_last[i]) < 1e-12);

  CHECK_THROWS_AS(accumulate_training_delta(acc, x, FlatVector(63), space), SparsifierError);
  auto wrong = Accumulator::zeros(5);
  CHECK_THROWS_AS(accumulate_training_delta(wrong, x, x1, space), SparsifierError);
}

TEST_CASE("averaging delta accumulation") {
  const auto spec = sym2_filters();
  const auto space = CoefficientSpace::wavelet(spec, 48);
  Rng rng(12);
  const auto pre = random_vector(rng, 48);

  auto acc = Accumulator{random_vector(rng, space.size()), true};
  const auto before = acc.scores;
  accumulate_averaging_delta(acc, pre, pre, space);
  CHECK(acc.scores == before);

  // A single parameter moved by averaging only touches the coefficients
  // whose support covers it.
  auto post = pre;
  post[20] += 0.75;
  accumulate_averaging_delta(acc, pre, post, space);
  FlatVector isolated(48, 0.0);
  isolated[20] = 0.75;
  const auto oracle = dwt(isolated, spec).data;
  std::size_t touched = 0;
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(std::abs(acc.scores[i] - before[i] - oracle[i]) < 1e-12);
    if (oracle[i] != 0.0) ++touched;
  }
  CHECK(touched > 0);
  CHECK(touched < oracle.size() / 2);
}

TEST_CASE("accumulator telescopes over rounds") {
  // Brute-force bookkeeping on a 10-parameter model: entries that are never
  // selected hold the transform of the total model change.
  const auto spec = sym2_filters();
  const auto space = CoefficientSpace::wavelet(spec, 10);
  Rng rng(31);
  auto x = random_vector(rng, 10);
  const auto initial = x;
  auto acc = Accumulator::zeros(space.size());
  const Selection always{{0, 2}, 0.2};
  FlatVector last_avg_delta;
  for (int round = 0; round < 6; ++round) {
    const auto trained = [&] {
      auto t = x;
      for (auto& v : t) v += 0.1 * standard_normal(rng);
      return t;
    }();
    accumulate_training_delta(acc, x, trained, space);
    reset_selected(acc, always);
    auto averaged = trained;
    for (auto& v : averaged) v += 0.05 * standard_normal(rng);
    accumulate_averaging_delta(acc, trained, averaged, space);
    last_avg_delta.assign(10, 0.0);
    for (std::size_t i = 0; i < 10; ++i) last_avg_delta[i] = averaged[i] - trained[i];
    x = averaged;
  }
  FlatVector total(10);
  for (std::size_t i = 0; i < 10; ++i) total[i] = x[i] - initial[i];
  const auto never_sent = dwt(total, spec).data;
  const auto since_reset = dwt(last_avg_delta, spec).data;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const bool selected = i == 0 || i == 2;
    const double expected = selected ? since_reset[i] : never_sent[i];
    CHECK(std::abs(acc.scores[i] - expected) < 1e-8);
  }
}
