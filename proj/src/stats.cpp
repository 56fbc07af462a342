#include "occupation/stats.hpp"

#include <algorithm>
#include <cmath>

#include "occupation/errors.hpp"

namespace occupation {

void Accumulator::add(double v) {
  ++n_;
  if (v != 0.0) {
    ++nonzero_;
  }
  const double delta = v - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (v - mean_);
}

void Accumulator::merge(const Accumulator& other) {
  if (other.n_ == 0) {
    return;
  }
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  n_ += other.n_;
  nonzero_ += other.nonzero_;
}

double Accumulator::variance() const noexcept {
  return n_ < 2 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(n_ - 1));
}

double Accumulator::std_error() const noexcept {
  return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

Estimate Estimate::make(double mean, double std_error, std::size_t n) {
  Estimate e;
  e.mean = mean;
  e.std_error = std_error;
  e.n_samples = n;
  e.ci95 = {mean - 1.96 * std_error, mean + 1.96 * std_error};
  return e;
}

Estimate Estimate::from(const Accumulator& acc, double scale) {
  Estimate e = make(scale * acc.mean(), std::abs(scale) * acc.std_error(), acc.count());
  e.n_nonzero = acc.nonzero();
  return e;
}

void Estimate::set_target(double t) {
  target = t;
  if (t != 0.0) {
    rel_err = std::abs(mean - t) / std::abs(t);
  } else {
    rel_err.reset();
  }
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::underpowered:
      return "underpowered";
  }
  return "fail";
}

Verdict compare_with_target(const Estimate& e, double target, double tol_rel) {
  if (!(tol_rel > 0.0)) {
    throw ConfigError("compare_with_target needs tol_rel > 0");
  }
  const double width = e.ci95.second - e.ci95.first;
  if (width > 2.0 * tol_rel * std::abs(target) || (e.n_nonzero == 0 && target != 0.0)) {
    return Verdict::underpowered;
  }
  const double allowed = std::max(1.96 * 1.5 * e.std_error, tol_rel * std::abs(target));
  return std::abs(e.mean - target) <= allowed ? Verdict::pass : Verdict::fail;
}

}  // namespace occupation
