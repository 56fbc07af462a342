#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "occupation/stats.hpp"

namespace occupation::cli {

/// One CSV line. Empty optionals print as blank fields.
struct Row {
  std::string experiment;
  std::string quantity;
  double estimate = 0.0;
  std::optional<double> std_error;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::optional<double> target;
  std::optional<double> rel_err;
  Verdict verdict = Verdict::fail;
  std::optional<std::size_t> n_samples;
  std::optional<double> eps;
  std::optional<double> dt;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

struct ExperimentInfo {
  std::string id;
  std::string identity;  ///< what the experiment checks, for `list`
  std::map<std::string, std::string> defaults;
};

/// Keys every experiment accepts besides its own defaults.
const std::map<std::string, std::string>& common_defaults();

const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo* find_experiment(std::string_view id);

/// Defaults of `info` merged with the common keys.
std::map<std::string, std::string> all_defaults(const ExperimentInfo& info);

/// Throws ConfigParseError for an unknown experiment, an unknown key or a
/// missing seed. Type and range errors surface when the experiment reads its
/// values, also as ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Runs the pipeline mapped to cfg.experiment and returns its rows.
std::vector<Row> run_experiment(const ExperimentConfig& cfg);

}  // namespace occupation::cli
