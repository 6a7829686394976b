#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jwins {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph over nodes 0..n-1 with sorted neighbor lists.
struct Topology {
  std::uint32_t n = 0;
  std::uint32_t d = 0;  // common degree; 0 if the graph is not regular
  std::uint64_t seed = 0;
  std::vector<std::vector<NodeId>> adjacency;

  /// Builds and validates a topology (no self-loops, no duplicate edges).
  static Topology from_edges(std::uint32_t n, std::span<const Edge> edges, std::uint64_t seed = 0);

  std::vector<Edge> edges() const;  // (i, j) with i < j, lexicographic
  bool connected() const;
  std::size_t degree(NodeId i) const { return adjacency[i].size(); }

  bool operator==(const Topology&) const = default;
};

/// Random d-regular connected simple graph from the configuration model.
/// Stubs are paired at random; a pair that would create a self-loop or a
/// duplicate edge is redrawn, and samples that get stuck or come out
/// disconnected are discarded. Deterministic in seed.
Topology generate_regular(std::uint32_t n, std::uint32_t d, std::uint64_t seed);

/// The round's topology under dynamic mode: every node derives the same
/// graph from (run_seed, round) without coordination.
Topology reshuffle(const Topology& current, std::uint64_t round, std::uint64_t run_seed);

/// Topology per round: fixed, or resampled every round.
class TopologySchedule {
 public:
  TopologySchedule(Topology base, bool dynamic, std::uint64_t run_seed)
      : base_(std::move(base)), dynamic_(dynamic), run_seed_(run_seed) {}

  Topology at_round(std::uint64_t round) const;
  const Topology& base() const { return base_; }
  bool dynamic() const { return dynamic_; }

 private:
  Topology base_;
  bool dynamic_;
  std::uint64_t run_seed_;
};

struct WeightedNeighbor {
  NodeId node;
  double weight;
};

/// Sparse symmetric mixing matrix; rows hold the self weight plus one entry
/// per neighbor.
class MixingWeights {
 public:
  MixingWeights() = default;
  MixingWeights(std::vector<double> self, std::vector<std::vector<WeightedNeighbor>> rows);

  /// Test helper: rows of a dense matrix, zeros dropped.
  static MixingWeights from_dense(const std::vector<std::vector<double>>& w);

  std::uint32_t size() const { return static_cast<std::uint32_t>(self_.size()); }
  double self_weight(NodeId i) const { return self_[i]; }
  std::span<const WeightedNeighbor> neighbors(NodeId i) const { return rows_[i]; }
  double weight(NodeId i, NodeId j) const;

 private:
  std::vector<double> self_;
  std::vector<std::vector<WeightedNeighbor>> rows_;
};

/// w_ij = 1 / (1 + max(deg_i, deg_j)) on edges, w_ii = 1 - sum of the row.
MixingWeights metropolis_hastings(const Topology& topology);

/// Text format: a header line "n d seed", then one "i j" line per edge.
std::string to_edge_list(const Topology& topology);
Topology parse_edge_list(std::string_view text);
void write_edge_list(const std::filesystem::path& path, const Topology& topology);
Topology read_edge_list(const std::filesystem::path& path);

}  // namespace jwins
