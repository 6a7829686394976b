#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jwins/codec.hpp"
#include "jwins/graph.hpp"
#include "jwins/learner.hpp"
#include "jwins/sparsifier.hpp"
#include "jwins/wavelet.hpp"

namespace jwins {

enum class Algorithm { jwins, full, random, choco };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

/// Component switches for ablation runs. All on is the complete protocol.
struct Ablation {
  bool wavelet = true;               // off: rank and average raw parameters
  bool accumulation = true;          // off: scores are overwritten every round
  bool random_cutoff = true;         // off: alpha pinned to its expected value
  bool metadata_compression = true;  // off: indices sent as raw u32

  bool operator==(const Ablation&) const = default;
};

struct NodeConfig {
  Algorithm algo = Algorithm::jwins;
  SgdConfig sgd;
  AlphaDistribution alpha = AlphaDistribution::standard();
  double fixed_alpha = 0.37;  // random sampling and Choco's TopK fraction
  double choco_gamma = 0.6;
  Ablation ablation;
  int wavelet_levels = 4;

  void validate() const;
};

/// One neighbor's values for a subset of coefficients.
struct Contribution {
  NodeId sender = 0;
  std::span<const Index> indices;
  std::span<const float> values;
};

/// Per coefficient k, the weighted mean over {self} and the neighbors that
/// sent k, with weights renormalized over those contributors. Coefficients
/// nobody sent keep their own value. Throws NodeError on a duplicate sender.
FlatVector sparse_average(std::span<const double> own, std::span<const Contribution> inbox,
                          const MixingWeights& weights, NodeId self);

/// A serialized message as delivered to a node.
struct Inbound {
  NodeId from = 0;
  std::span<const std::uint8_t> bytes;
};

struct RoundOutcome {
  std::size_t bytes_sent = 0;     // message size times neighbor count
  std::size_t metadata_sent = 0;  // metadata part of bytes_sent
  double alpha_used = 0.0;
  std::vector<std::string> rejected;  // one reason per discarded inbound message
};

/// One participant. A round is split at the exchange barrier:
/// train_and_send() runs local steps and builds the broadcast message,
/// aggregate() consumes the neighbors' messages of the same round.
class Node {
 public:
  Node(NodeId id, Model initial, std::vector<SampleIndex> local, const NodeConfig& cfg, std::uint64_t run_seed);

  const std::vector<std::uint8_t>& train_and_send(std::uint32_t round, const Dataset& train);
  RoundOutcome aggregate(std::span<const Inbound> inbox, const MixingWeights& weights);

  NodeId id() const { return id_; }
  const Model& model() const { return model_; }
  const NodeConfig& config() const { return cfg_; }
  const std::vector<std::uint8_t>& outbound() const { return message_; }

  /// Replaces the parameters, e.g. to start from a prescribed model.
  void set_params(std::span<const double> params) { model_.set_flat(params); }

  const Accumulator& accumulator() const { return acc_; }
  const CoefficientSpace& space() const { return space_; }
  /// Choco's public estimate x_hat and neighbor aggregate s.
  const FlatVector& choco_estimate() const { return x_hat_; }
  const FlatVector& choco_aggregate() const { return s_; }

 private:
  struct Decoded {
    NodeId sender = 0;
    std::vector<Index> indices;
    std::vector<float> values;
  };

  void build_message(std::vector<Index> indices, std::span<const double> source, UpdateKind kind,
                     std::uint64_t seed = 0);
  std::optional<Decoded> decode(const Inbound& in, const MixingWeights& weights, std::vector<std::string>& rejected) const;
  std::vector<Contribution> contributions(const std::vector<Decoded>& decoded) const;

  NodeId id_;
  Model model_;
  std::vector<SampleIndex> local_;
  NodeConfig cfg_;
  CoefficientSpace space_;
  Rng data_rng_;
  Rng alpha_rng_;
  Rng misc_rng_;

  std::uint32_t round_ = 0;
  bool pending_ = false;
  FlatVector x_tau_;
  FlatVector own_coeffs_;
  Selection sel_;
  std::vector<float> sent_values_;
  std::vector<std::uint8_t> message_;
  ByteBreakdown message_sizes_;
  std::vector<Index> all_indices_;

  Accumulator acc_;
  FlatVector x_hat_;
  FlatVector s_;
};

}  // namespace jwins
