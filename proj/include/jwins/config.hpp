#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "jwins/learner.hpp"
#include "jwins/node.hpp"

namespace jwins {

struct TopologyConfig {
  std::uint32_t degree = 4;
  bool dynamic = false;  // redraw the graph every round
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  enum class Type { synthetic, idx };
  Type type = Type::synthetic;

  // synthetic
  SynthSpec synth;
  std::size_t test_per_class = 50;

  // idx
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Everything a run needs. Parsed from a JSON document; unknown keys are
/// rejected so that typos do not silently fall back to defaults.
struct RunConfig {
  Algorithm algo = Algorithm::jwins;
  std::uint32_t nodes = 16;
  TopologyConfig topology;
  std::size_t hidden = 0;  // 0: logistic regression
  DatasetConfig dataset;
  std::uint32_t shards_per_node = 2;
  std::uint64_t partition_seed = 0;
  SgdConfig sgd;
  AlphaDistribution alpha = AlphaDistribution::standard();
  double fixed_alpha = 0.37;
  double choco_gamma = 0.6;
  std::uint32_t rounds = 100;
  std::uint32_t eval_every = 10;
  Ablation ablation;
  int wavelet_levels = 4;
  std::uint32_t workers = 1;
  std::uint64_t seed = 0;
  std::string output = "metrics.csv";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  NodeConfig node_config() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Compact single-line JSON with every field resolved; parse_config accepts it back.
/// workers and output are left out: they do not change what a run computes.
std::string to_json(const RunConfig& cfg);

}  // namespace jwins
