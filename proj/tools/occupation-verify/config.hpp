#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "occupation/errors.hpp"
#include "occupation/quadrature.hpp"
#include "occupation/region.hpp"

namespace occupation::cli {

/// Malformed config text or value; the message names the line and/or field.
class ConfigParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Flat key=value configuration. `lines` remembers where each key came from
/// so later type errors can point back at the file.
struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  void set(const std::string& key, std::string value);
};

/// One key per line, `#` starts a comment, blank lines ignored. Keys are
/// [a-z0-9_]+ and may appear once. `experiment` fills the experiment field.
ExperimentConfig parse_config(std::istream& in, std::string_view source = "config");
ExperimentConfig parse_config_text(std::string_view text, std::string_view source = "config");

/// experiment first, then the remaining keys in lexicographic order.
std::string serialize(const ExperimentConfig& cfg);

/// Typed view over a config with per-experiment defaults.
class ConfigView {
 public:
  ConfigView(const ExperimentConfig& cfg, const std::map<std::string, std::string>& defaults);

  bool has(const std::string& key) const;
  std::string text(const std::string& key) const;
  double number(const std::string& key) const;
  double positive(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t seed() const;
  Region region(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;

  /// Every key with its effective value (defaults filled in), sorted.
  std::map<std::string, std::string> effective() const;

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  const ExperimentConfig& cfg_;
  const std::map<std::string, std::string>& defaults_;
};

/// "disc(x,y,r)", "rect(x0,y0,x1,y1)" or "empty".
Region parse_region(std::string_view text);
std::string format_region(const Region& r);

}  // namespace occupation::cli
