#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "experiments.hpp"
#include "report.hpp"

namespace {

using namespace occupation;
using namespace occupation::cli;

int list_experiments() {
  for (const ExperimentInfo& e : experiments()) {
    std::cout << e.id << '\t' << e.identity << '\n';
  }
  return 0;
}

int run(const std::string& id, const std::string& config_path, const std::optional<std::uint64_t>& seed,
        const std::optional<unsigned>& workers, std::string out_path,
        const std::vector<std::string>& overrides) {
  if (!find_experiment(id)) {
    std::cerr << "error: unknown experiment '" << id << "' (see `list`)\n";
    return 1;
  }
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << '\n';
    return 1;
  }
  ExperimentConfig cfg = parse_config(in, config_path);
  if (!cfg.experiment.empty() && cfg.experiment != id) {
    std::cerr << "error: " << config_path << " is for experiment '" << cfg.experiment
              << "', not '" << id << "'\n";
    return 1;
  }
  cfg.experiment = id;
  for (const std::string& kv : overrides) {
    const ExperimentConfig one = parse_config_text(kv, "--set");
    for (const auto& [k, v] : one.values) {
      cfg.values[k] = v;
      cfg.lines.erase(k);
    }
  }
  if (seed) {
    cfg.values["seed"] = std::to_string(*seed);
  }
  if (workers) {
    cfg.values["workers"] = std::to_string(*workers);
  }
  if (out_path.empty() && cfg.has("out")) {
    out_path = cfg.values.at("out");
  }
  validate_config(cfg);

  const std::vector<Row> rows = run_experiment(cfg);
  std::ostringstream csv;
  write_csv(csv, rows);
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    out << csv.str();
    std::ofstream prov(out_path + ".provenance");
    write_provenance(prov, cfg);
    if (!out || !prov) {
      std::cerr << "error: cannot write " << out_path << '\n';
      return 1;
    }
  }
  for (const Row& r : rows) {
    std::cerr << id << ": " << r.quantity << " = " << format_number(r.estimate) << " ["
              << to_string(r.verdict) << "]\n";
  }
  return exit_code(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs occupation-measure verification experiments and writes CSV reports."};
  app.require_subcommand(1);

  app.add_subcommand("list", "Print experiment ids and the identity each one checks");

  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  std::string id;
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::vector<std::string> overrides;
  run_cmd->add_option("--experiment", id, "Experiment id")->required();
  run_cmd->add_option("--config", config_path, "key=value config file")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out_path, "CSV output path (stdout when absent)");
  run_cmd->add_option("--set", overrides, "Extra key=value settings, applied after the file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand("list")) {
      return list_experiments();
    }
    return run(id, config_path, seed, workers, out_path, overrides);
  } catch (const occupation::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
