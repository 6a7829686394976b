#include <algorithm>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jwins/error.hpp"
#include "jwins/sim.hpp"

namespace jwins {
namespace {

struct RoundView {
  const MetricsRecord* agg = nullptr;
  double node_bytes = 0.0;
  std::size_t node_rows = 0;
};

std::string optional_text(const std::optional<double>& v, std::string_view spec) {
  return v ? fmt::format(fmt::runtime(spec), *v) : std::string("-");
}

}  // namespace

std::vector<RunSummary> compare(std::span<const std::filesystem::path> files, std::optional<double> target_acc) {
  if (files.empty()) throw ConfigError("compare needs at least one metrics file");
  std::vector<RunSummary> out;
  for (const auto& path : files) {
    const auto metrics = read_metrics(path);
    std::map<std::uint32_t, RoundView> rounds;
    for (const auto& r : metrics.records) {
      auto& view = rounds[r.round];
      if (r.node) {
        view.node_bytes += r.bytes_cum;
        ++view.node_rows;
      } else {
        view.agg = &r;
      }
    }
    if (rounds.empty()) throw ConfigError(fmt::format("{}: no metrics rows", path.string()));
    for (const auto& [round, view] : rounds) {
      if (!view.agg || view.node_rows == 0) {
        throw ConfigError(fmt::format("{}: round {} lacks AGG or per-node rows", path.string(), round));
      }
    }

    RunSummary s;
    s.file = path.string();
    const auto& [last_round, last] = *rounds.rbegin();
    s.final_round = last_round;
    s.final_acc = last.agg->test_acc;
    s.final_loss = last.agg->test_loss;
    s.total_bytes = last.node_bytes;
    if (target_acc) {
      for (const auto& [round, view] : rounds) {
        if (view.agg->test_acc >= *target_acc) {
          s.target_round = round;
          s.target_bytes = view.node_bytes;
          break;
        }
      }
    }
    out.push_back(s);
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[0].total_bytes > 0.0) out[i].savings = 1.0 - out[i].total_bytes / out[0].total_bytes;
  }
  return out;
}

void write_compare_text(std::ostream& out, std::span<const RunSummary> rows, bool target_mode) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.file.size());
  fmt::print(out, "{:<{}}  {:>6}  {:>8}  {:>8}  {:>14}  {:>8}", "file", width, "round", "acc", "loss", "total_bytes",
             "savings");
  if (target_mode) fmt::print(out, "  {:>12}  {:>14}", "target_round", "target_bytes");
  fmt::print(out, "\n");
  for (const auto& r : rows) {
    fmt::print(out, "{:<{}}  {:>6}  {:>8.4f}  {:>8.4f}  {:>14.0f}  {:>8}", r.file, width, r.final_round, r.final_acc,
               r.final_loss, r.total_bytes,
               r.savings ? fmt::format("{:.1f}%", 100.0 * *r.savings) : std::string("-"));
    if (target_mode) {
      fmt::print(out, "  {:>12}  {:>14}", r.target_round ? fmt::format("{}", *r.target_round) : std::string("-"),
                 optional_text(r.target_bytes, "{:.0f}"));
    }
    fmt::print(out, "\n");
  }
}

void write_compare_csv(std::ostream& out, std::span<const RunSummary> rows, bool target_mode) {
  fmt::print(out, "file,final_round,final_acc,final_loss,total_bytes,savings_pct");
  if (target_mode) fmt::print(out, ",target_round,target_bytes");
  fmt::print(out, "\n");
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{},{},{},{}", r.file, r.final_round, r.final_acc, r.final_loss, r.total_bytes,
               r.savings ? fmt::format("{:.1f}", 100.0 * *r.savings) : std::string());
    if (target_mode) {
      fmt::print(out, ",{},{}", r.target_round ? fmt::format("{}", *r.target_round) : std::string(),
                 r.target_bytes ? fmt::format("{}", *r.target_bytes) : std::string());
    }
    fmt::print(out, "\n");
  }
}

}  // namespace jwins
