#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiments.hpp"

namespace occupation::cli {

inline constexpr const char* kCsvHeader =
    "experiment,quantity,estimate,std_error,ci_lo,ci_hi,target,rel_err,verdict,n_samples,eps,dt,"
    "seed,wall_time_s";

/// %.9g, or an empty string for a missing value.
std::string format_number(double v);

/// Header plus one line per row; every line ends with '\n'.
void write_csv(std::ostream& out, const std::vector<Row>& rows);

/// 0 when every row passes, 2 on any failure, 3 when something is
/// underpowered and nothing failed.
int exit_code(const std::vector<Row>& rows);

/// Effective configuration (defaults filled in) and worker count.
void write_provenance(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace occupation::cli
