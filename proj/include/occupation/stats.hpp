#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>

namespace occupation {

/// Streaming mean and variance (Welford), mergeable in a fixed order.
class Accumulator {
 public:
  void add(double v);
  void merge(const Accumulator& other);

  std::size_t count() const noexcept { return n_; }
  std::size_t nonzero() const noexcept { return nonzero_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 with fewer than two values.
  double variance() const noexcept;
  /// Standard error of the mean.
  double std_error() const noexcept;

 private:
  std::size_t n_ = 0;
  std::size_t nonzero_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::optional<double> target;
  std::optional<double> rel_err;
  std::size_t n_truncated = 0;
  std::size_t n_nonzero = 0;

  static Estimate make(double mean, double std_error, std::size_t n);
  /// scale * (sample mean) with the matching standard error.
  static Estimate from(const Accumulator& acc, double scale = 1.0);
  void set_target(double t);
};

enum class Verdict { pass, fail, underpowered };

std::string_view to_string(Verdict v);

/// Underpowered when the CI is wider than 2 tol |target| (or nothing nonzero
/// was sampled for a nonzero target); otherwise pass when
/// |mean - target| <= max(1.96 * 1.5 * std_error, tol |target|).
Verdict compare_with_target(const Estimate& e, double target, double tol_rel);

}  // namespace occupation
