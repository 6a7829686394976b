#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jwins/config.hpp"
#include "jwins/learner.hpp"

namespace jwins {

inline constexpr std::string_view kMetricsHeader = "round,node,test_loss,test_acc,bytes_cum,bytes_meta_cum,alpha";

struct MetricsRecord {
  std::uint32_t round = 0;     // number of completed rounds
  std::optional<NodeId> node;  // empty: mean over all nodes (AGG)
  double test_loss = 0.0;
  double test_acc = 0.0;
  double bytes_cum = 0.0;  // integral for node rows, a mean for AGG rows
  double bytes_meta_cum = 0.0;
  double alpha = 0.0;  // fraction used in this round

  bool operator==(const MetricsRecord&) const = default;
};

struct Datasets {
  Dataset train;
  Dataset test;
};

/// Throws ConfigError for a bad dataset section and DataError for unreadable files.
Datasets load_datasets(const RunConfig& cfg);

/// Common starting model of every node.
Model initial_model(const RunConfig& cfg, const Dataset& train);

struct RunResult {
  std::vector<MetricsRecord> records;
  std::vector<Model> final_models;
  std::vector<std::string> warnings;  // rejected inbound messages
  std::uint64_t bytes_total = 0;
  std::uint64_t metadata_total = 0;
};

/// Round-synchronous simulation. `initial` either is empty (every node starts
/// from initial_model) or holds one model per node. The result does not
/// depend on cfg.workers.
RunResult run(const RunConfig& cfg, const Datasets& data, std::span<const Model> initial = {});
RunResult run(const RunConfig& cfg);

/// Metrics CSV: a `# config: {...}` line, the header, then one row per record.
void write_metrics(std::ostream& out, const RunConfig& cfg, std::span<const MetricsRecord> records);
void write_metrics(const std::filesystem::path& path, const RunConfig& cfg, std::span<const MetricsRecord> records);

struct MetricsFile {
  std::string config_json;  // empty when the file has no config line
  std::vector<MetricsRecord> records;
};

/// Throws ConfigError naming the file on any schema violation.
MetricsFile read_metrics(const std::filesystem::path& path);

struct ProbeRow {
  std::uint32_t round = 0;
  double mse_wavelet = 0.0;
  double mse_random = 0.0;
  double cum_wavelet = 0.0;
  double cum_random = 0.0;
};

/// Trains one model on the whole training set and, after every round,
/// measures how well a receiver that only gets `budget` of the entries can
/// track it. Wavelet side: TopK over the accumulated coefficient change.
/// Random side: a fresh random subset of raw parameters. Entries not
/// refreshed keep their previously received value.
std::vector<ProbeRow> reconstruction_probe(const RunConfig& cfg, const Datasets& data, double budget);
void write_probe(std::ostream& out, std::span<const ProbeRow> rows);

struct RunSummary {
  std::string file;
  std::uint32_t final_round = 0;
  double final_acc = 0.0;
  double final_loss = 0.0;
  double total_bytes = 0.0;  // summed over nodes
  std::optional<double> savings;  // 1 - total / total of the first file
  std::optional<std::uint32_t> target_round;
  std::optional<double> target_bytes;
};

std::vector<RunSummary> compare(std::span<const std::filesystem::path> files,
                                std::optional<double> target_acc = std::nullopt);
void write_compare_text(std::ostream& out, std::span<const RunSummary> rows, bool target_mode);
void write_compare_csv(std::ostream& out, std::span<const RunSummary> rows, bool target_mode);

}  // namespace jwins
