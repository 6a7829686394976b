// Command-line front end: run a simulation, probe reconstruction error, or
// summarize metrics files.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <optional>

#include "jwins/config.hpp"
#include "jwins/error.hpp"
#include "jwins/graph.hpp"
#include "jwins/sim.hpp"

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw jwins::ConfigError(fmt::format("cannot write '{}'", path));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized learning simulator with wavelet-domain sparse sharing"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> algo;
  std::optional<std::uint32_t> rounds;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> workers;
  std::optional<std::string> out_path;
  std::optional<std::string> topology_out;

  auto* run_cmd = app.add_subcommand("run", "Run a simulation and write the metrics CSV");
  run_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  run_cmd->add_option("--algo", algo, "jwins | full | random | choco");
  run_cmd->add_option("--rounds", rounds, "Number of rounds");
  run_cmd->add_option("--seed", seed, "Global seed");
  run_cmd->add_option("--workers", workers, "Worker threads (does not change results)");
  run_cmd->add_option("--out", out_path, "Metrics CSV path");
  run_cmd->add_option("--topology-out", topology_out, "Also write the initial graph as an edge list");

  double budget = 0.10;
  auto* probe_cmd = app.add_subcommand("probe", "Single-node reconstruction error at a fixed budget");
  probe_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  probe_cmd->add_option("--budget", budget, "Fraction of entries refreshed per round")->check(CLI::Range(0.0, 1.0));
  probe_cmd->add_option("--rounds", rounds, "Number of rounds");
  probe_cmd->add_option("--seed", seed, "Global seed");
  probe_cmd->add_option("--out", out_path, "CSV path (default: stdout)");

  std::vector<std::string> files;
  std::optional<double> target_acc;
  std::optional<std::string> csv_path;
  auto* compare_cmd = app.add_subcommand("compare", "Summarize metrics CSV files");
  compare_cmd->add_option("files", files, "Metrics CSV files; savings are relative to the first")->required();
  compare_cmd->add_option("--target-acc", target_acc, "Report when mean accuracy first reaches this value");
  compare_cmd->add_option("--csv", csv_path, "Also write the summary as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd || *probe_cmd) {
      auto cfg = jwins::load_config(config_path);
      if (algo) cfg.algo = jwins::parse_algorithm(*algo);
      if (rounds) cfg.rounds = *rounds;
      if (seed) cfg.seed = *seed;
      if (workers) cfg.workers = *workers;
      cfg.validate();

      if (*run_cmd) {
        if (out_path) cfg.output = *out_path;
        if (topology_out) {
          jwins::write_edge_list(*topology_out,
                                 jwins::generate_regular(cfg.nodes, cfg.topology.degree, cfg.topology.seed));
        }
        const auto result = jwins::run(cfg);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
        jwins::write_metrics(cfg.output, cfg, result.records);
        std::cerr << fmt::format("wrote {} ({} rounds, {} bytes sent)\n", cfg.output, cfg.rounds, result.bytes_total);
      } else {
        const auto rows = jwins::reconstruction_probe(cfg, jwins::load_datasets(cfg), budget);
        if (out_path) {
          auto out = open_output(*out_path);
          jwins::write_probe(out, rows);
        } else {
          jwins::write_probe(std::cout, rows);
        }
      }
    } else {
      std::vector<std::filesystem::path> paths(files.begin(), files.end());
      const auto summary = jwins::compare(paths, target_acc);
      jwins::write_compare_text(std::cout, summary, target_acc.has_value());
      if (csv_path) {
        auto out = open_output(*csv_path);
        jwins::write_compare_csv(out, summary, target_acc.has_value());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
