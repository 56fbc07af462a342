#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace occupation {

/// A point lies outside the set where a kernel or map is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration: counts, tolerances, budgets or parameter ranges.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A deterministic approximation did not reach its requested tolerance.
/// Carries the last two iterates so callers can judge how far off it was.
class PrecisionError : public std::runtime_error {
 public:
  PrecisionError(const std::string& what, double previous, double last)
      : std::runtime_error(what), previous_(previous), last_(last) {}

  double previous() const noexcept { return previous_; }
  double last() const noexcept { return last_; }

 private:
  double previous_;
  double last_;
};

/// Every Monte Carlo sample failed (for example all paths were truncated).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear-algebra failure on a lattice model.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Report or dump file could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace occupation
