#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

namespace occupation::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool valid_key(std::string_view k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) {
    return false;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<double> parse_list(std::string_view s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string_view item = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
    double v = 0.0;
    if (!parse_double(item, v)) {
      throw ConfigParseError("expected a number, got '" + std::string(trim(item)) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, std::string value) {
  if (key == "experiment") {
    experiment = std::move(value);
  } else {
    values[key] = std::move(value);
  }
}

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig cfg;
  std::string raw;
  int line_no = 0;
  bool seen_experiment = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigParseError(where + "expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key)) {
      throw ConfigParseError(where + "invalid key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigParseError(where + "field '" + key + "' has no value");
    }
    if (key == "experiment") {
      if (seen_experiment) {
        throw ConfigParseError(where + "duplicate key 'experiment'");
      }
      seen_experiment = true;
    } else if (cfg.values.count(key)) {
      throw ConfigParseError(where + "duplicate key '" + key + "'");
    }
    cfg.set(key, value);
    cfg.lines[key] = line_no;
  }
  return cfg;
}

ExperimentConfig parse_config_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  return parse_config(in, source);
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  if (!cfg.experiment.empty()) {
    out += "experiment=" + cfg.experiment + "\n";
  }
  for (const auto& [k, v] : cfg.values) {
    out += k + "=" + v + "\n";
  }
  return out;
}

ConfigView::ConfigView(const ExperimentConfig& cfg, const std::map<std::string, std::string>& defaults)
    : cfg_(cfg), defaults_(defaults) {}

bool ConfigView::has(const std::string& key) const {
  return cfg_.values.count(key) || defaults_.count(key);
}

void ConfigView::fail(const std::string& key, const std::string& what) const {
  std::string where;
  if (const auto it = cfg_.lines.find(key); it != cfg_.lines.end()) {
    where = "line " + std::to_string(it->second) + ": ";
  }
  throw ConfigParseError(where + "field '" + key + "': " + what);
}

std::string ConfigView::text(const std::string& key) const {
  if (const auto it = cfg_.values.find(key); it != cfg_.values.end()) {
    return it->second;
  }
  if (const auto it = defaults_.find(key); it != defaults_.end() && !it->second.empty()) {
    return it->second;
  }
  fail(key, "required but not set");
}

double ConfigView::number(const std::string& key) const {
  const std::string s = text(key);
  double v = 0.0;
  if (!parse_double(s, v)) {
    fail(key, "expected a number, got '" + s + "'");
  }
  return v;
}

double ConfigView::positive(const std::string& key) const {
  const double v = number(key);
  if (!(v > 0.0)) {
    fail(key, "must be positive");
  }
  return v;
}

std::size_t ConfigView::count(const std::string& key) const {
  const double v = number(key);
  if (!(v >= 1.0 && v <= 1e12 && v == std::floor(v))) {
    fail(key, "expected a positive integer");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t ConfigView::seed() const {
  const std::string s = text("seed");
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail("seed", "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

Region ConfigView::region(const std::string& key) const {
  try {
    return parse_region(text(key));
  } catch (const ConfigParseError&) {
    throw;
  } catch (const ConfigError& e) {
    fail(key, e.what());
  }
}

std::vector<double> ConfigView::numbers(const std::string& key) const {
  try {
    return parse_list(text(key));
  } catch (const ConfigParseError& e) {
    fail(key, e.what());
  }
}

std::map<std::string, std::string> ConfigView::effective() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : defaults_) {
    if (!v.empty()) {
      out[k] = v;
    }
  }
  for (const auto& [k, v] : cfg_.values) {
    out[k] = v;
  }
  return out;
}

Region parse_region(std::string_view text) {
  text = trim(text);
  if (text == "empty") {
    return Region::empty();
  }
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw ConfigParseError("expected disc(x,y,r), rect(x0,y0,x1,y1) or empty, got '" +
                           std::string(text) + "'");
  }
  const std::string_view kind = trim(text.substr(0, open));
  const std::vector<double> v = parse_list(text.substr(open + 1, text.size() - open - 2));
  if (kind == "disc" && v.size() == 3) {
    return Region::disc({v[0], v[1]}, v[2]);
  }
  if (kind == "rect" && v.size() == 4) {
    return Region::rect({v[0], v[1]}, {v[2], v[3]});
  }
  throw ConfigParseError("expected disc(x,y,r), rect(x0,y0,x1,y1) or empty, got '" +
                         std::string(text) + "'");
}

std::string format_region(const Region& r) {
  std::ostringstream out;
  out.precision(9);
  if (const Disc* d = r.as_disc()) {
    out << "disc(" << d->center.real() << ',' << d->center.imag() << ',' << d->radius << ')';
  } else if (const Rect* q = r.as_rect()) {
    out << "rect(" << q->lo.real() << ',' << q->lo.imag() << ',' << q->hi.real() << ','
        << q->hi.imag() << ')';
  } else {
    out << "empty";
  }
  return out.str();
}

}  // namespace occupation::cli
