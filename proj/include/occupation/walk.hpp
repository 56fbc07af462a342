#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "occupation/region.hpp"
#include "occupation/rng.hpp"
#include "occupation/sampler.hpp"

namespace occupation::sampler {

/// Exit time T1 of standard planar Brownian motion from the unit disc,
/// started at the centre. Survival S(t) = sum_k 2 / (j_k J1(j_k)) exp(-j_k^2 t / 2)
/// over the zeros j_k of J0; E[T1] = 1/2 and E[T1^2] = 3/8.
class DiscExitTime {
 public:
  static const DiscExitTime& instance();

  double survival(double t) const;
  double sample(RngStream& rng) const;

 private:
  DiscExitTime();

  std::vector<double> zeros_;
  std::vector<double> weights_;
  std::vector<double> grid_t_;
  std::vector<double> grid_log_s_;
};

/// Path functionals accumulated on the fly, without storing the trajectory.
struct WalkSummary {
  double lifetime = 0.0;
  double start_angle = 0.0;
  std::vector<double> occupation;  ///< one entry per region
  double ordered = 0.0;            ///< ordered product over the region list, if requested
  std::size_t euler_steps = 0;
  std::size_t jumps = 0;
  bool truncated = false;
};

struct WalkOptions {
  double dt = 1e-5;
  std::size_t max_steps = kDefaultMaxSteps;
  bool ordered = false;  ///< also accumulate ordered_occupation_product over all regions
  bool jumps = true;     ///< false reproduces the Euler path sampler draw for draw
};

/// Walk-on-spheres variant of sample_bm_until_exit. Whenever the disc of radius
/// rho around the current point avoids the unit circle and every region
/// boundary with rho >= 3 sqrt(dt), the walk jumps to a uniform point on that
/// circle and charges an exact exit time rho^2 T1 to the regions containing
/// the centre. Otherwise it takes the same bridge-tested Euler step as the
/// path sampler. Occupation times agree in law with the Euler path version up
/// to the O(dt) discretization near region boundaries.
WalkSummary walk_until_exit(Point start, std::span<const Region> regions, const WalkOptions& opt,
                            RngStream& rng);

/// Excursion start on the (1 - eps) circle (angle drawn first), then walk_until_exit.
WalkSummary walk_excursion(const ExcursionConfig& cfg, std::span<const Region> regions,
                           bool ordered, RngStream& rng);

}  // namespace occupation::sampler
