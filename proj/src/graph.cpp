#include "jwins/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "jwins/error.hpp"
#include "jwins/random.hpp"

namespace jwins {
namespace {

constexpr int kMaxRejections = 10000;
constexpr int kMaxConsecutiveRedraws = 200;

std::uint32_t common_degree(const std::vector<std::vector<NodeId>>& adjacency) {
  if (adjacency.empty()) return 0;
  const auto d = adjacency.front().size();
  for (const auto& row : adjacency) {
    if (row.size() != d) return 0;
  }
  return static_cast<std::uint32_t>(d);
}

// One pairing attempt. Returns false when the remaining stubs cannot be
// matched without a self-loop or duplicate edge.
bool pair_stubs(std::uint32_t n, std::uint32_t d, Rng& rng, std::vector<std::vector<NodeId>>& adjacency) {
  adjacency.assign(n, {});
  std::vector<NodeId> stubs;
  stubs.reserve(static_cast<std::size_t>(n) * d);
  for (NodeId v = 0; v < n; ++v) {
    for (std::uint32_t k = 0; k < d; ++k) stubs.push_back(v);
  }
  auto adjacent = [&](NodeId a, NodeId b) {
    const auto& row = adjacency[a];
    return std::find(row.begin(), row.end(), b) != row.end();
  };
  while (!stubs.empty()) {
    int redraws = 0;
    for (;;) {
      const std::size_t m = stubs.size();
      const std::size_t a = uniform_below(rng, m);
      std::size_t b = uniform_below(rng, m - 1);
      if (b >= a) ++b;
      const NodeId u = stubs[a];
      const NodeId v = stubs[b];
      if (u != v && !adjacent(u, v)) {
        adjacency[u].push_back(v);
        adjacency[v].push_back(u);
        // Remove the higher position first so the lower one stays valid.
        for (std::size_t pos : {std::max(a, b), std::min(a, b)}) {
          stubs[pos] = stubs.back();
          stubs.pop_back();
        }
        break;
      }
      if (++redraws > kMaxConsecutiveRedraws) return false;
    }
  }
  for (auto& row : adjacency) std::sort(row.begin(), row.end());
  return true;
}

}  // namespace

Topology Topology::from_edges(std::uint32_t n, std::span<const Edge> edges, std::uint64_t seed) {
  Topology t;
  t.n = n;
  t.seed = seed;
  t.adjacency.assign(n, {});
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) throw GraphError("edge endpoint out of range");
    if (i == j) throw GraphError("self-loop");
    t.adjacency[i].push_back(j);
    t.adjacency[j].push_back(i);
  }
  for (auto& row : t.adjacency) {
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end()) throw GraphError("duplicate edge");
  }
  t.d = common_degree(t.adjacency);
  return t;
}

std::vector<Edge> Topology::edges() const {
  std::vector<Edge> out;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : adjacency[i]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

bool Topology::connected() const {
  if (n == 0) return true;
  std::vector<bool> seen(n, false);
  std::vector<NodeId> frontier{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const NodeId v = frontier.back();
    frontier.pop_back();
    for (NodeId u : adjacency[v]) {
      if (!seen[u]) {
        seen[u] = true;
        ++reached;
        frontier.push_back(u);
      }
    }
  }
  return reached == n;
}

Topology generate_regular(std::uint32_t n, std::uint32_t d, std::uint64_t seed) {
  if (d == 0 || d >= n) throw GraphError("degree must satisfy 0 < d < n");
  if ((static_cast<std::uint64_t>(n) * d) % 2 != 0) throw GraphError("n * d must be even");

  Rng rng(seed);
  Topology t;
  t.n = n;
  t.d = d;
  t.seed = seed;
  for (int rejections = 0; rejections <= kMaxRejections; ++rejections) {
    if (pair_stubs(n, d, rng, t.adjacency) && t.connected()) {
      return t;
    }
  }
  throw GraphError("generation stalled");
}

Topology reshuffle(const Topology& current, std::uint64_t round, std::uint64_t run_seed) {
  return generate_regular(current.n, current.d, derive_seed({run_seed, static_cast<std::uint64_t>(Stream::topology), round}));
}

Topology TopologySchedule::at_round(std::uint64_t round) const {
  return dynamic_ ? reshuffle(base_, round, run_seed_) : base_;
}

MixingWeights::MixingWeights(std::vector<double> self, std::vector<std::vector<WeightedNeighbor>> rows)
    : self_(std::move(self)), rows_(std::move(rows)) {
  if (self_.size() != rows_.size()) throw GraphError("mixing weights: row count mismatch");
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
  }
}

MixingWeights MixingWeights::from_dense(const std::vector<std::vector<double>>& w) {
  std::vector<double> self(w.size());
  std::vector<std::vector<WeightedNeighbor>> rows(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i].size() != w.size()) throw GraphError("mixing weights: matrix is not square");
    self[i] = w[i][i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (j != i && w[i][j] != 0.0) rows[i].push_back({static_cast<NodeId>(j), w[i][j]});
    }
  }
  return MixingWeights(std::move(self), std::move(rows));
}

double MixingWeights::weight(NodeId i, NodeId j) const {
  if (i == j) return self_[i];
  for (const auto& e : rows_[i]) {
    if (e.node == j) return e.weight;
  }
  return 0.0;
}

MixingWeights metropolis_hastings(const Topology& topology) {
  std::vector<double> self(topology.n);
  std::vector<std::vector<WeightedNeighbor>> rows(topology.n);
  for (NodeId i = 0; i < topology.n; ++i) {
    double total = 0.0;
    for (NodeId j : topology.adjacency[i]) {
      const double w = 1.0 / (1.0 + static_cast<double>(std::max(topology.degree(i), topology.degree(j))));
      rows[i].push_back({j, w});
      total += w;
    }
    self[i] = 1.0 - total;
  }
  return MixingWeights(std::move(self), std::move(rows));
}

std::string to_edge_list(const Topology& topology) {
  std::ostringstream out;
  out << topology.n << ' ' << topology.d << ' ' << topology.seed << '\n';
  for (auto [i, j] : topology.edges()) out << i << ' ' << j << '\n';
  return out.str();
}

Topology parse_edge_list(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::uint64_t seed = 0;
  if (!(in >> n >> d >> seed)) throw GraphError("edge list: bad header");
  std::vector<Edge> edges;
  NodeId i = 0;
  NodeId j = 0;
  while (in >> i >> j) edges.emplace_back(i, j);
  if (!in.eof()) throw GraphError("edge list: malformed edge line");
  auto t = Topology::from_edges(n, edges, seed);
  if (t.d != d) throw GraphError("edge list: header degree does not match edges");
  return t;
}

void write_edge_list(const std::filesystem::path& path, const Topology& topology) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot open " + path.string());
  out << to_edge_list(topology);
}

Topology read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_edge_list(buffer.str());
}

}  // namespace jwins
