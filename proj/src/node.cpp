#include "jwins/node.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "jwins/error.hpp"

namespace jwins {
namespace {

std::vector<float> gather(std::span<const double> source, std::span<const Index> indices) {
  std::vector<float> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(static_cast<float>(source[i]));
  return out;
}

bool carries_index_list(UpdateKind kind) {
  return kind == UpdateKind::jwins_indices || kind == UpdateKind::raw_indices;
}

}  // namespace

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::jwins:
      return "jwins";
    case Algorithm::full:
      return "full";
    case Algorithm::random:
      return "random";
    case Algorithm::choco:
      return "choco";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto algo : {Algorithm::jwins, Algorithm::full, Algorithm::random, Algorithm::choco}) {
    if (to_string(algo) == name) return algo;
  }
  throw ConfigError(fmt::format("unknown algorithm '{}'", name));
}

void NodeConfig::validate() const {
  sgd.validate();
  if (algo == Algorithm::jwins) alpha.validate();
  if (!(fixed_alpha > 0.0 && fixed_alpha <= 1.0)) throw ConfigError("fixed alpha must lie in (0, 1]");
  if (!(choco_gamma >= 0.0)) throw ConfigError("choco gamma must be nonnegative");
  if (wavelet_levels < 1) throw ConfigError("wavelet levels must be >= 1");
}

FlatVector sparse_average(std::span<const double> own, std::span<const Contribution> inbox,
                          const MixingWeights& weights, NodeId self) {
  std::vector<const Contribution*> ordered;
  ordered.reserve(inbox.size());
  for (const auto& c : inbox) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->sender < b->sender; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->sender == ordered[i - 1]->sender) {
      throw NodeError(fmt::format("duplicate sender {}", ordered[i]->sender));
    }
  }

  const double w_self = weights.self_weight(self);
  FlatVector numerator(own.size());
  FlatVector denominator(own.size(), w_self);
  std::vector<bool> touched(own.size(), false);
  for (std::size_t k = 0; k < own.size(); ++k) numerator[k] = w_self * own[k];

  for (const auto* c : ordered) {
    if (c->indices.size() != c->values.size()) throw NodeError("contribution index/value count mismatch");
    const double w = weights.weight(self, c->sender);
    for (std::size_t t = 0; t < c->indices.size(); ++t) {
      const Index k = c->indices[t];
      if (k >= own.size()) throw NodeError("contribution index out of range");
      numerator[k] += w * static_cast<double>(c->values[t]);
      denominator[k] += w;
      touched[k] = true;
    }
  }

  FlatVector result(own.begin(), own.end());
  for (std::size_t k = 0; k < own.size(); ++k) {
    if (touched[k] && denominator[k] > 0.0) result[k] = numerator[k] / denominator[k];
  }
  return result;
}

Node::Node(NodeId id, Model initial, std::vector<SampleIndex> local, const NodeConfig& cfg, std::uint64_t run_seed)
    : id_(id),
      model_(std::move(initial)),
      local_(std::move(local)),
      cfg_(cfg),
      space_(cfg.algo == Algorithm::jwins && cfg.ablation.wavelet
                 ? CoefficientSpace::wavelet(sym2_filters(cfg.wavelet_levels), model_.size())
                 : CoefficientSpace::identity(model_.size())),
      data_rng_(derive_seed({run_seed, static_cast<std::uint64_t>(Stream::data), id})),
      alpha_rng_(derive_seed({run_seed, static_cast<std::uint64_t>(Stream::alpha), id})),
      misc_rng_(derive_seed({run_seed, static_cast<std::uint64_t>(Stream::misc), id})) {
  cfg_.validate();
  if (cfg_.algo == Algorithm::jwins) acc_ = Accumulator::zeros(space_.size(), cfg_.ablation.accumulation);
  if (cfg_.algo == Algorithm::choco) {
    x_hat_.assign(model_.size(), 0.0);
    s_.assign(model_.size(), 0.0);
  }
  all_indices_.resize(space_.size());
  std::iota(all_indices_.begin(), all_indices_.end(), Index{0});
}

void Node::build_message(std::vector<Index> indices, std::span<const double> source, UpdateKind kind,
                         std::uint64_t seed) {
  SparseUpdate u;
  u.round = round_;
  u.sender = id_;
  u.kind = kind;
  u.seed = seed;
  u.values = gather(source, indices);
  if (carries_index_list(kind)) u.indices = indices;
  sent_values_ = u.values;
  sel_.indices = std::move(indices);
  message_sizes_ = byte_breakdown(u);
  message_ = serialize(u);
}

const std::vector<std::uint8_t>& Node::train_and_send(std::uint32_t round, const Dataset& train) {
  round_ = round;
  const FlatVector x_start = model_.flat();
  local_sgd(model_, train, local_, cfg_.sgd, data_rng_);
  x_tau_ = model_.flat();
  const UpdateKind index_kind = cfg_.ablation.metadata_compression ? UpdateKind::jwins_indices : UpdateKind::raw_indices;

  switch (cfg_.algo) {
    case Algorithm::jwins: {
      accumulate_training_delta(acc_, x_start, x_tau_, space_);
      const double alpha = cfg_.ablation.random_cutoff ? draw_alpha(cfg_.alpha, alpha_rng_) : cfg_.alpha.expected();
      auto sel = select_topk(acc_.scores, alpha);
      own_coeffs_ = space_.forward(x_tau_);
      build_message(std::move(sel.indices), own_coeffs_, index_kind);
      sel_.alpha_used = alpha;
      break;
    }
    case Algorithm::full:
      own_coeffs_ = x_tau_;
      build_message(all_indices_, x_tau_, UpdateKind::full);
      sel_.alpha_used = 1.0;
      break;
    case Algorithm::random: {
      own_coeffs_ = x_tau_;
      const std::uint64_t seed = misc_rng_();
      auto sel = select_random(x_tau_.size(), cfg_.fixed_alpha, seed);
      build_message(std::move(sel.indices), x_tau_, UpdateKind::random_seed, seed);
      sel_.alpha_used = cfg_.fixed_alpha;
      break;
    }
    case Algorithm::choco: {
      FlatVector diff(x_tau_.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x_tau_[i] - x_hat_[i];
      auto sel = select_topk(diff, cfg_.fixed_alpha);
      build_message(std::move(sel.indices), diff, index_kind);
      sel_.alpha_used = cfg_.fixed_alpha;
      break;
    }
  }
  pending_ = true;
  return message_;
}

std::optional<Node::Decoded> Node::decode(const Inbound& in, const MixingWeights& weights,
                                          std::vector<std::string>& rejected) const {
  auto reject = [&](const std::string& why) {
    rejected.push_back(fmt::format("node {} dropped message from {}: {}", id_, in.from, why));
    return std::nullopt;
  };
  if (in.from == id_ || weights.weight(id_, in.from) <= 0.0) return reject("sender is not a neighbor");

  SparseUpdate u;
  try {
    u = deserialize(in.bytes);
  } catch (const CodecError& e) {
    return reject(e.what());
  }
  if (u.sender != in.from) return reject("sender field does not match the link");
  if (u.round != round_) return reject(fmt::format("wrong round {} (expected {})", u.round, round_));

  const std::size_t len = space_.size();
  Decoded d;
  d.sender = in.from;
  switch (cfg_.algo) {
    case Algorithm::jwins:
    case Algorithm::choco:
      if (!carries_index_list(u.kind)) return reject("unexpected update kind");
      if (!u.indices.empty() && u.indices.back() >= len) return reject("index out of range");
      d.indices = std::move(u.indices);
      break;
    case Algorithm::full:
      if (u.kind != UpdateKind::full) return reject("unexpected update kind");
      if (u.values.size() != len) return reject("full update has the wrong length");
      break;
    case Algorithm::random:
      if (u.kind != UpdateKind::random_seed) return reject("unexpected update kind");
      if (u.values.size() > len) return reject("index out of range");
      d.indices = select_random_k(len, u.values.size(), u.seed).indices;
      break;
  }
  d.values = std::move(u.values);
  return d;
}

std::vector<Contribution> Node::contributions(const std::vector<Decoded>& decoded) const {
  std::vector<Contribution> out;
  out.reserve(decoded.size());
  for (const auto& d : decoded) {
    const std::span<const Index> idx = cfg_.algo == Algorithm::full ? std::span<const Index>(all_indices_)
                                                                    : std::span<const Index>(d.indices);
    out.push_back({d.sender, idx, d.values});
  }
  return out;
}

RoundOutcome Node::aggregate(std::span<const Inbound> inbox, const MixingWeights& weights) {
  if (!pending_) throw NodeError("aggregate called before train_and_send");
  pending_ = false;

  RoundOutcome out;
  const std::size_t degree = weights.neighbors(id_).size();
  out.bytes_sent = degree * message_.size();
  out.metadata_sent = degree * message_sizes_.metadata;
  out.alpha_used = sel_.alpha_used;

  std::vector<Decoded> decoded;
  std::vector<NodeId> seen;
  for (const auto& in : inbox) {
    if (std::find(seen.begin(), seen.end(), in.from) != seen.end()) {
      out.rejected.push_back(fmt::format("node {} dropped message from {}: duplicate sender", id_, in.from));
      continue;
    }
    if (auto d = decode(in, weights, out.rejected)) {
      seen.push_back(in.from);
      decoded.push_back(std::move(*d));
    }
  }
  const auto inbox_view = contributions(decoded);

  if (cfg_.algo == Algorithm::choco) {
    // x_hat += q_self; s += w_ii q_self + sum_j w_ij q_j.
    for (std::size_t t = 0; t < sel_.indices.size(); ++t) {
      const Index k = sel_.indices[t];
      x_hat_[k] += static_cast<double>(sent_values_[t]);
      s_[k] += weights.self_weight(id_) * static_cast<double>(sent_values_[t]);
    }
    std::vector<const Contribution*> ordered;
    for (const auto& c : inbox_view) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->sender < b->sender; });
    for (const auto* c : ordered) {
      const double w = weights.weight(id_, c->sender);
      for (std::size_t t = 0; t < c->indices.size(); ++t) {
        s_[c->indices[t]] += w * static_cast<double>(c->values[t]);
      }
    }
    double weight_sum = weights.self_weight(id_);
    for (const auto& e : weights.neighbors(id_)) weight_sum += e.weight;
    FlatVector next(x_tau_.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = x_tau_[i] + cfg_.choco_gamma * (s_[i] - x_hat_[i] * weight_sum);
    }
    model_.set_flat(next);
    return out;
  }

  const auto averaged = sparse_average(own_coeffs_, inbox_view, weights, id_);
  // Apply only the change made by averaging, so an untouched round leaves
  // the trained model bit-identical.
  FlatVector change(averaged.size());
  for (std::size_t k = 0; k < change.size(); ++k) change[k] = averaged[k] - own_coeffs_[k];
  const auto param_change = space_.inverse(change);
  FlatVector next(x_tau_.size());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = x_tau_[i] + param_change[i];

  if (cfg_.algo == Algorithm::jwins) {
    reset_selected(acc_, sel_);
    accumulate_averaging_delta(acc_, x_tau_, next, space_);
  }
  model_.set_flat(next);
  return out;
}

}  // namespace jwins
