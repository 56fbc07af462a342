#include "report.hpp"

#include <cstdio>
#include <ostream>

#include "occupation/rng.hpp"

namespace occupation::cli {

namespace {

std::string field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// Quote fields that contain a separator or a quote.
std::string text_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << kCsvHeader << '\n';
  for (const Row& r : rows) {
    out << text_field(r.experiment) << ',' << text_field(r.quantity) << ','
        << format_number(r.estimate) << ',' << field(r.std_error) << ',' << field(r.ci_lo) << ','
        << field(r.ci_hi) << ',' << field(r.target) << ',' << field(r.rel_err) << ','
        << to_string(r.verdict) << ',' << (r.n_samples ? std::to_string(*r.n_samples) : "") << ','
        << field(r.eps) << ',' << field(r.dt) << ',' << r.seed << ','
        << format_number(r.wall_time_s) << '\n';
  }
}

int exit_code(const std::vector<Row>& rows) {
  bool underpowered = false;
  for (const Row& r : rows) {
    if (r.verdict == Verdict::fail) {
      return 2;
    }
    underpowered = underpowered || r.verdict == Verdict::underpowered;
  }
  return underpowered ? 3 : 0;
}

void write_provenance(std::ostream& out, const ExperimentConfig& cfg) {
  const ExperimentInfo* info = find_experiment(cfg.experiment);
  out << "# occupation-verify run\n";
  out << "# rng " << RngStream::kAlgorithm << '\n';
  if (info) {
    out << "# checks: " << info->identity << '\n';
    out << "# defaults\n";
    for (const auto& [k, v] : all_defaults(*info)) {
      if (!v.empty()) {
        out << "#   " << k << '=' << v << '\n';
      }
    }
    ExperimentConfig eff;
    eff.experiment = cfg.experiment;
    const auto d = all_defaults(*info);
    for (const auto& [k, v] : ConfigView(cfg, d).effective()) {
      eff.values[k] = v;
    }
    out << serialize(eff);
  } else {
    out << serialize(cfg);
  }
}

}  // namespace occupation::cli
