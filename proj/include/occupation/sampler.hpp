#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occupation/region.hpp"
#include "occupation/rng.hpp"

namespace occupation::sampler {

/// Planar trajectory sampled at t_i = i * dt, i = 0..n.
struct Path {
  double dt = 0.0;
  std::vector<Point> points;

  std::size_t steps() const noexcept { return points.empty() ? 0 : points.size() - 1; }
  double lifetime() const noexcept { return dt * static_cast<double>(steps()); }
};

/// Step budget exhausted; carries the partial path so the caller can decide.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, Path partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Path& partial() const noexcept { return partial_; }

 private:
  Path partial_;
};

inline constexpr std::size_t kDefaultMaxSteps = 100'000'000;

struct ExcursionConfig {
  double eps_start = 0.01;  ///< start radius is 1 - eps_start
  double dt = 1e-5;
  std::size_t max_steps = kDefaultMaxSteps;

  /// Throws ConfigError unless eps_start in (1e-4, 0.2), 0 < dt <= eps_start^2 / 4
  /// and max_steps >= 1.
  void validate() const;
};

struct LoopRootConfig {
  double r = 1.0;
  double theta = 0.0;
  double eps_offset = 0.05;  ///< start at z + eps_offset * (inward normal)
  double dt = 1e-5;
  double stop_radius = 0.005;
  std::size_t max_steps = kDefaultMaxSteps;

  /// Root point z = r e^{i theta} on the circle.
  Point root() const;
  /// Throws ConfigError unless r in (0, 1], eps_offset < r / 10,
  /// 0 < stop_radius <= eps_offset and 0 < dt <= eps_offset^2 / 4.
  void validate() const;
};

/// Euler walk with per-coordinate variance dt, stopped at the first index with
/// |point| >= disc_radius. A Brownian-bridge test after each step catches
/// crossings between grid times (the exit point is then the radial projection
/// onto the circle), which removes the O(sqrt(dt)) overshoot bias.
Path sample_bm_until_exit(Point start, double disc_radius, double dt, RngStream& rng,
                          std::size_t max_steps = kDefaultMaxSteps);

/// Start uniform on the circle of radius 1 - eps (the angle is the first draw
/// from the stream), then run until exit from the unit disc.
Path sample_excursion(const ExcursionConfig& cfg, RngStream& rng);

/// Diffusion conditioned to leave U_r at z, by Euler-Maruyama with drift
/// grad log h_{U_r}(., z). Starts at z + eps_offset * n and stops once within
/// stop_radius of z. The drift displacement is capped at half the distance to
/// the circle, and proposals leaving U_r are redrawn.
Path sample_conditioned_loop(const LoopRootConfig& cfg, RngStream& rng);

/// Left-endpoint Riemann sum dt * #{i < n : point_i in A}.
double occupation_time(const Path& path, const Region& A);

/// Discretized integral over 0 < t_1 < ... < t_p < lifetime of
/// prod_k 1_{A_k}(gamma_{t_k}); needs 2 <= p <= 5 regions.
double ordered_occupation_product(const Path& path, std::span<const Region> regions);

/// Lens-overlap kernel of two eps-discs at distance d, divided by (pi eps^2)^2.
double lens_weight(double d, double eps);

/// sum_{i,j} dt1 dt2 w(|a_i - b_j|) 1_A(a_i) 1_A(b_j) with the lens kernel,
/// pruned through a spatial hash of cell size 2 eps. Symmetric in the two
/// paths bit for bit.
double mollified_pair_intersection(const Path& p1, const Path& p2, const Region& A, double eps_moll);

/// Little-endian dump: n (u64), dt (f64), then 2n f64 coordinates of the n points.
void write_path(std::ostream& out, const Path& path);
Path read_path(std::istream& in);

}  // namespace occupation::sampler
