#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jwins/random.hpp"
#include "jwins/wavelet.hpp"

namespace jwins {

using SampleIndex = std::uint32_t;

/// Labeled samples stored row-major: sample i occupies
/// features[i * dims, (i + 1) * dims).
struct Dataset {
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t i) const { return {features.data() + i * dims, dims}; }
};

/// Softmax classifier with an optional ReLU hidden layer. hidden = 0 gives
/// multinomial logistic regression.
///
/// Flat parameter order, layer by layer with weights row-major then biases:
///   hidden > 0:  W1 [hidden x inputs], b1 [hidden], W2 [classes x hidden], b2 [classes]
///   hidden = 0:  W  [classes x inputs], b  [classes]
struct Architecture {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  std::size_t param_count() const;
  bool operator==(const Architecture&) const = default;
};

class Model {
 public:
  Model() = default;
  Model(Architecture arch, FlatVector params);

  /// Glorot-uniform weights and zero biases.
  static Model initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const FlatVector& flat() const { return params_; }
  void set_flat(std::span<const double> params);
  std::size_t size() const { return params_.size(); }

  /// Mean cross-entropy over the batch; adds its gradient into grad when
  /// grad is non-empty (grad must be zeroed by the caller).
  double loss_and_gradient(const Dataset& data, std::span<const SampleIndex> batch, std::span<double> grad) const;

  std::vector<double> logits(std::span<const double> x) const;
  std::uint32_t predict(std::span<const double> x) const;

 private:
  Architecture arch_;
  FlatVector params_;
};

struct SgdConfig {
  double eta = 0.05;
  std::uint32_t tau = 1;
  std::uint32_t batch_size = 16;

  void validate() const;
};

/// tau plain SGD steps. Each step draws min(batch_size, |local|) distinct
/// local samples; batches are independent across steps.
void local_sgd(Model& model, const Dataset& data, std::span<const SampleIndex> local, const SgdConfig& cfg,
               Rng& rng);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const Model& model, const Dataset& test);

using Partition = std::vector<std::vector<SampleIndex>>;

/// Samples sorted by label are cut into n * shards_per_node contiguous shards
/// of near-equal size, which are dealt to nodes by a seeded permutation.
Partition shard_partition(const Dataset& data, std::uint32_t n, std::uint32_t shards_per_node, std::uint64_t seed);

/// IDX image/label pair; pixels scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct SynthSpec {
  std::size_t classes = 10;
  std::size_t dims = 32;
  std::size_t per_class = 100;
  std::uint64_t seed = 0;  // fixes the class means
  double noise = 1.0;      // per-feature standard deviation
  double correlation = 0.0;  // noise length scale in features; 0 is white noise
};

/// Class-conditional Gaussians. Each class mean is a smooth random profile
/// over the feature index, the way neighboring pixels of an image are
/// correlated. sample_stream selects an independent draw (e.g. train = 0,
/// test = 1) around the same means. Samples are interleaved by class.
Dataset synth_blobs(const SynthSpec& spec, std::uint64_t sample_stream = 0);

}  // namespace jwins
