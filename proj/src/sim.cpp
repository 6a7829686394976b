#include "jwins/sim.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jwins/error.hpp"
#include "jwins/graph.hpp"
#include "jwins/node.hpp"
#include "jwins/sparsifier.hpp"

namespace jwins {
namespace {

/// Runs fn(i) for i in [0, count) on up to `workers` threads and rethrows the
/// first exception.
template <typename Fn>
void parallel_for(std::size_t count, std::uint32_t workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(workers, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double parse_number(std::string_view field, const std::filesystem::path& file, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ConfigError(fmt::format("{}:{}: '{}' is not a number", file.string(), line, field));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double mse(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

}  // namespace

Datasets load_datasets(const RunConfig& cfg) {
  Datasets d;
  if (cfg.dataset.type == DatasetConfig::Type::synthetic) {
    d.train = synth_blobs(cfg.dataset.synth, 0);
    SynthSpec test_spec = cfg.dataset.synth;
    test_spec.per_class = cfg.dataset.test_per_class;
    d.test = synth_blobs(test_spec, 1);
  } else {
    d.train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
    d.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
    if (d.test.dims != d.train.dims) throw DataError("train and test images differ in size");
    d.test.classes = d.train.classes = std::max(d.train.classes, d.test.classes);
  }
  return d;
}

Model initial_model(const RunConfig& cfg, const Dataset& train) {
  const Architecture arch{train.dims, cfg.hidden, train.classes};
  return Model::initialize(arch, derive_seed({cfg.seed, static_cast<std::uint64_t>(Stream::init)}));
}

RunResult run(const RunConfig& cfg) {
  cfg.validate();
  return run(cfg, load_datasets(cfg));
}

RunResult run(const RunConfig& cfg, const Datasets& data, std::span<const Model> initial) {
  cfg.validate();
  const std::uint32_t n = cfg.nodes;
  if (!initial.empty() && initial.size() != n) throw ConfigError("need exactly one initial model per node");

  const auto partition = shard_partition(data.train, n, cfg.shards_per_node, cfg.partition_seed);
  const Model start = initial_model(cfg, data.train);
  const NodeConfig node_cfg = cfg.node_config();
  std::vector<Node> nodes;
  nodes.reserve(n);
  for (NodeId i = 0; i < n; ++i) {
    nodes.emplace_back(i, initial.empty() ? start : initial[i], partition[i], node_cfg, cfg.seed);
  }

  const TopologySchedule schedule(generate_regular(n, cfg.topology.degree, cfg.topology.seed), cfg.topology.dynamic,
                                  cfg.seed);
  MixingWeights weights = metropolis_hastings(schedule.base());

  RunResult result;
  std::vector<std::uint64_t> bytes(n, 0), meta(n, 0);
  std::vector<RoundOutcome> outcomes(n);
  std::vector<Evaluation> evals(n);

  for (std::uint32_t t = 0; t < cfg.rounds; ++t) {
    if (schedule.dynamic()) weights = metropolis_hastings(schedule.at_round(t));

    parallel_for(n, cfg.workers, [&](std::size_t i) { nodes[i].train_and_send(t, data.train); });
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      std::vector<Inbound> inbox;
      for (const auto& nb : weights.neighbors(static_cast<NodeId>(i))) {
        inbox.push_back({nb.node, nodes[nb.node].outbound()});
      }
      outcomes[i] = nodes[i].aggregate(inbox, weights);
    });

    for (NodeId i = 0; i < n; ++i) {
      bytes[i] += outcomes[i].bytes_sent;
      meta[i] += outcomes[i].metadata_sent;
      for (auto& w : outcomes[i].rejected) result.warnings.push_back(fmt::format("round {}: {}", t, w));
    }

    const std::uint32_t done = t + 1;
    if (done % cfg.eval_every != 0 && done != cfg.rounds) continue;
    parallel_for(n, cfg.workers, [&](std::size_t i) { evals[i] = evaluate(nodes[i].model(), data.test); });
    MetricsRecord agg;
    agg.round = done;
    for (NodeId i = 0; i < n; ++i) {
      MetricsRecord r{done,
                      i,
                      evals[i].loss,
                      evals[i].accuracy,
                      static_cast<double>(bytes[i]),
                      static_cast<double>(meta[i]),
                      outcomes[i].alpha_used};
      agg.test_loss += r.test_loss;
      agg.test_acc += r.test_acc;
      agg.bytes_cum += r.bytes_cum;
      agg.bytes_meta_cum += r.bytes_meta_cum;
      agg.alpha += r.alpha;
      result.records.push_back(r);
    }
    agg.test_loss /= n;
    agg.test_acc /= n;
    agg.bytes_cum /= n;
    agg.bytes_meta_cum /= n;
    agg.alpha /= n;
    result.records.push_back(agg);
  }

  result.bytes_total = std::accumulate(bytes.begin(), bytes.end(), std::uint64_t{0});
  result.metadata_total = std::accumulate(meta.begin(), meta.end(), std::uint64_t{0});
  for (const auto& node : nodes) result.final_models.push_back(node.model());
  return result;
}

void write_metrics(std::ostream& out, const RunConfig& cfg, std::span<const MetricsRecord> records) {
  fmt::print(out, "# config: {}\n{}\n", to_json(cfg), kMetricsHeader);
  for (const auto& r : records) {
    const std::string node = r.node ? fmt::format("{}", *r.node) : std::string("AGG");
    fmt::print(out, "{},{},{},{},{},{},{}\n", r.round, node, r.test_loss, r.test_acc, r.bytes_cum, r.bytes_meta_cum,
               r.alpha);
  }
}

void write_metrics(const std::filesystem::path& path, const RunConfig& cfg, std::span<const MetricsRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  write_metrics(out, cfg, records);
  if (!out) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

MetricsFile read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("{}: cannot open", path.string()));
  MetricsFile file;
  std::string line;
  std::size_t number = 0;
  bool header_seen = false;
  constexpr std::string_view kConfigPrefix = "# config: ";
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.starts_with(kConfigPrefix)) {
        file.config_json = line.substr(kConfigPrefix.size());
        continue;
      }
      if (line != kMetricsHeader) {
        throw ConfigError(fmt::format("{}:{}: expected header '{}'", path.string(), number, kMetricsHeader));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 7) {
      throw ConfigError(fmt::format("{}:{}: expected 7 fields, found {}", path.string(), number, fields.size()));
    }
    MetricsRecord r;
    const double round = parse_number(fields[0], path, number);
    if (round < 0 || round != static_cast<std::uint32_t>(round)) {
      throw ConfigError(fmt::format("{}:{}: bad round '{}'", path.string(), number, fields[0]));
    }
    r.round = static_cast<std::uint32_t>(round);
    if (fields[1] != "AGG") r.node = static_cast<NodeId>(parse_number(fields[1], path, number));
    r.test_loss = parse_number(fields[2], path, number);
    r.test_acc = parse_number(fields[3], path, number);
    r.bytes_cum = parse_number(fields[4], path, number);
    r.bytes_meta_cum = parse_number(fields[5], path, number);
    r.alpha = parse_number(fields[6], path, number);
    file.records.push_back(r);
  }
  if (!header_seen) throw ConfigError(fmt::format("{}: missing header '{}'", path.string(), kMetricsHeader));
  return file;
}

std::vector<ProbeRow> reconstruction_probe(const RunConfig& cfg, const Datasets& data, double budget) {
  cfg.validate();
  if (!(budget > 0.0 && budget <= 1.0)) throw ConfigError("budget must lie in (0, 1]");
  Model model = initial_model(cfg, data.train);
  std::vector<SampleIndex> everything(data.train.size());
  std::iota(everything.begin(), everything.end(), SampleIndex{0});

  const auto space = CoefficientSpace::wavelet(sym2_filters(cfg.wavelet_levels), model.size());
  Accumulator acc = Accumulator::zeros(space.size(), true);
  FlatVector received_coeffs = space.forward(model.flat());
  FlatVector received_params = model.flat();
  Rng data_rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(Stream::data), 0}));
  Rng misc_rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(Stream::misc), 0}));

  std::vector<ProbeRow> rows;
  ProbeRow row;
  for (std::uint32_t t = 0; t < cfg.rounds; ++t) {
    const FlatVector before = model.flat();
    local_sgd(model, data.train, everything, cfg.sgd, data_rng);
    const FlatVector& after = model.flat();

    // Unsent coefficient change accumulates until the entry is picked.
    accumulate_training_delta(acc, before, after, space);
    const auto top = select_topk(acc.scores, budget);
    const auto coeffs = space.forward(after);
    for (Index k : top.indices) received_coeffs[k] = coeffs[k];
    reset_selected(acc, top);

    const auto sampled = select_random(after.size(), budget, misc_rng());
    for (Index k : sampled.indices) received_params[k] = after[k];

    row.round = t + 1;
    row.mse_wavelet = mse(space.inverse(received_coeffs), after);
    row.mse_random = mse(received_params, after);
    row.cum_wavelet += row.mse_wavelet;
    row.cum_random += row.mse_random;
    rows.push_back(row);
  }
  return rows;
}

void write_probe(std::ostream& out, std::span<const ProbeRow> rows) {
  fmt::print(out, "round,mse_wavelet,mse_random,cum_wavelet,cum_random\n");
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{},{},{}\n", r.round, r.mse_wavelet, r.mse_random, r.cum_wavelet, r.cum_random);
  }
}

}  // namespace jwins
