#pragma once

#include <cmath>

#include "occupation/rng.hpp"

namespace occupation::sampler::detail {

// Probability that a Brownian bridge between two points at distances a and b
// inside a (locally flat) boundary touched it during a step of variance dt.
// Beyond exponent 40 the probability is below 2^-53 and no draw is spent.
inline bool bridge_crossed(double a, double b, double dt, RngStream& rng) {
  const double expo = 2.0 * a * b / dt;
  if (expo > 40.0) {
    return false;
  }
  return rng.uniform() < std::exp(-expo);
}

// Radial projection of p onto the circle of radius r, nudged so |result| >= r.
inline Point project_out(Point p, double r) {
  Point q = p * (r / std::abs(p));
  while (std::abs(q) < r) {
    q *= 1.0 + 0x1.0p-52;
  }
  return q;
}

}  // namespace occupation::sampler::detail
