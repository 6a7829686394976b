#include <doctest.h>

#include <cmath>
#include <set>

#include "jwins/error.hpp"
#include "jwins/graph.hpp"
#include "jwins/random.hpp"

using namespace jwins;

namespace {

void check_regular(const Topology& t, std::uint32_t d) {
  REQUIRE(t.adjacency.size() == t.n);
  for (NodeId i = 0; i < t.n; ++i) {
    CHECK(t.degree(i) == d);
    for (NodeId j : t.adjacency[i]) {
      CHECK(j != i);
      const auto& back = t.adjacency[j];
      CHECK(std::find(back.begin(), back.end(), i) != back.end());
    }
  }
  CHECK(t.connected());
}

}  // namespace

TEST_CASE("forced and standard regular graphs") {
  const auto k5 = generate_regular(5, 4, 123);
  check_regular(k5, 4);
  CHECK(k5.edges().size() == 10);

  const auto g = generate_regular(96, 4, 7);
  check_regular(g, 4);
  CHECK(g.d == 4);
  CHECK(g == generate_regular(96, 4, 7));
  CHECK(!(g == generate_regular(96, 4, 8)));

  CHECK(generate_regular(2, 1, 0).edges() == std::vector<Edge>{{0, 1}});
  CHECK(generate_regular(3, 2, 0).edges().size() == 3);
}

TEST_CASE("degree histogram is a single value across sizes") {
  for (auto [n, d] : {std::pair{8u, 3u}, {16u, 4u}, {32u, 5u}, {100u, 6u}, {384u, 6u}}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      check_regular(generate_regular(n, d, seed), d);
    }
  }
}

TEST_CASE("invalid generator arguments") {
  CHECK_THROWS_AS(generate_regular(5, 3, 0), GraphError);  // n*d odd
  CHECK_THROWS_AS(generate_regular(4, 4, 0), GraphError);
  CHECK_THROWS_AS(generate_regular(4, 0, 0), GraphError);
}

TEST_CASE("metropolis-hastings weights") {
  const auto w = metropolis_hastings(generate_regular(24, 4, 3));
  for (NodeId i = 0; i < 24; ++i) {
    CHECK(w.self_weight(i) == doctest::Approx(0.2).epsilon(1e-15));
    for (const auto& e : w.neighbors(i)) CHECK(e.weight == 0.2);
  }

  const auto k5 = metropolis_hastings(generate_regular(5, 4, 0));
  for (NodeId i = 0; i < 5; ++i) {
    for (NodeId j = 0; j < 5; ++j) CHECK(std::abs(k5.weight(i, j) - 0.2) < 1e-15);
  }

  // Path 0 - 1 - 2, summed by hand.
  const std::vector<Edge> path{{0, 1}, {1, 2}};
  const auto p = metropolis_hastings(Topology::from_edges(3, path));
  CHECK(p.weight(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(p.weight(1, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(p.weight(0, 2) == 0.0);
  CHECK(p.self_weight(0) == doctest::Approx(2.0 / 3.0));
  CHECK(p.self_weight(1) == doctest::Approx(1.0 / 3.0));
  for (NodeId i = 0; i < 3; ++i) {
    double row = 0.0;
    double col = 0.0;
    for (NodeId j = 0; j < 3; ++j) {
      row += p.weight(i, j);
      col += p.weight(j, i);
      CHECK(p.weight(i, j) == p.weight(j, i));
      CHECK(p.weight(i, j) >= 0.0);
    }
    CHECK(std::abs(row - 1.0) < 1e-12);
    CHECK(std::abs(col - 1.0) < 1e-12);
  }
}

TEST_CASE("mixing contracts toward the average") {
  // Power iteration on W - J/n restricted to zero-mean vectors.
  const std::uint32_t n = 32;
  const auto w = metropolis_hastings(generate_regular(n, 4, 11));
  Rng rng(1);
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng);
  double rate = 0.0;
  for (int it = 0; it < 500; ++it) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    for (auto& x : v) x -= mean;
    std::vector<double> next(n, 0.0);
    for (NodeId i = 0; i < n; ++i) {
      next[i] = w.self_weight(i) * v[i];
      for (const auto& e : w.neighbors(i)) next[i] += e.weight * v[e.node];
    }
    double before = 0.0;
    double after = 0.0;
    for (NodeId i = 0; i < n; ++i) {
      before += v[i] * v[i];
      after += next[i] * next[i];
    }
    rate = std::sqrt(after / before);
    for (NodeId i = 0; i < n; ++i) v[i] = next[i] / std::sqrt(after);
  }
  CHECK(rate < 1.0);
  CHECK(rate > 0.0);
}

TEST_CASE("dynamic topologies") {
  const auto base = generate_regular(32, 4, 5);
  const TopologySchedule dynamic(base, true, 99);
  CHECK(dynamic.at_round(3) == dynamic.at_round(3));
  std::set<std::vector<Edge>> seen;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto t = dynamic.at_round(r);
    check_regular(t, 4);
    seen.insert(t.edges());
  }
  CHECK(seen.size() == 100);
  CHECK(reshuffle(base, 7, 99) == dynamic.at_round(7));

  const TopologySchedule fixed(base, false, 99);
  CHECK(fixed.at_round(0) == base);
  CHECK(fixed.at_round(41) == base);
}

TEST_CASE("edge list format") {
  const auto t = generate_regular(10, 3, 42);
  const auto text = to_edge_list(t);
  CHECK(text.rfind("10 3 42\n", 0) == 0);
  CHECK(parse_edge_list(text) == t);

  CHECK_THROWS_AS(parse_edge_list("3 2"), GraphError);
  CHECK_THROWS_AS(parse_edge_list("3 2 0\n0 1\n1 x\n"), GraphError);
  CHECK_THROWS_AS(parse_edge_list("3 2 0\n0 0\n"), GraphError);
  CHECK_THROWS_AS(parse_edge_list("3 2 0\n0 1\n0 1\n"), GraphError);
  CHECK_THROWS_AS(parse_edge_list("3 2 0\n0 1\n1 2\n"), GraphError);  // header degree mismatch
}
