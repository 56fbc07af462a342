#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occupation/quadrature.hpp"
#include "occupation/region.hpp"
#include "occupation/sampler.hpp"
#include "occupation/stats.hpp"
#include "occupation/walk.hpp"

namespace occupation::estimators {

enum class Engine {
  euler,  ///< stored Euler paths from the sampler
  walk,   ///< walk-on-spheres summaries (same law, far fewer steps)
};

/// Random streams: task t of an estimator uses RngStream(seed, stream_base + t).
/// Results depend on (seed, stream_base, tasks) but not on workers.
struct RunOptions {
  std::uint64_t seed = 1;
  std::uint64_t stream_base = 0;
  unsigned workers = 1;
  std::size_t tasks = 64;
  Engine engine = Engine::walk;
};

using PathFunctional = std::function<double(const sampler::Path&)>;
using SummaryFunctional = std::function<double(const sampler::WalkSummary&)>;

/// Total mass of the eps-excursion measure, 2 pi / eps.
double excursion_weight(double eps);

/// mu(F) ~ (2 pi / eps) E[F] over n excursions started on the (1 - eps) circle.
/// Truncated paths are counted and left out; all truncated -> EstimationError.
Estimate mc_excursion_expectation(const PathFunctional& F, const sampler::ExcursionConfig& cfg,
                                  std::size_t n, const RunOptions& opt);

/// Same, for functionals of the per-excursion summary over `regions`
/// (occupation per region, lifetime, start angle, optionally the ordered product).
/// Either engine can produce the summary.
Estimate mc_excursion_summary(const SummaryFunctional& F, std::span<const Region> regions,
                              bool ordered, const sampler::ExcursionConfig& cfg, std::size_t n,
                              const RunOptions& opt);

/// mu(tau) with target 2 pi.
Estimate tau_mass(const sampler::ExcursionConfig& cfg, std::size_t n, const RunOptions& opt);

/// mu(occ(A) occ(B)) with target 4 int int_{AxB} G. A region lying entirely
/// outside the open disc gives target 0.
Estimate excursion_covariance(const Region& A, const Region& B, const sampler::ExcursionConfig& cfg,
                              std::size_t n, const RunOptions& opt,
                              const analytic::QuadratureSpec& quad = {8, 6, 1e-6});

/// mu(f(gamma_0) occ(A)) with target 2 int_A u, u the harmonic extension of f.
/// f takes the boundary angle.
Estimate dirichlet_weighted_occupation(const std::function<double(double)>& f, const Region& A,
                                       const sampler::ExcursionConfig& cfg, std::size_t n,
                                       const RunOptions& opt);

/// Ordered p-fold occupation moment (p = 2 or 3) with target 2 x Green chain.
Estimate higher_moment_ordered(std::span<const Region> regions, const sampler::ExcursionConfig& cfg,
                               std::size_t n, const RunOptions& opt,
                               const analytic::QuadratureSpec& quad = {8, 6, 1e-6});

/// Loop roots: r^2 uniform on (r_min^2, 1) split into equal-mass strata,
/// theta uniform. A root on radius r starts eps * r inside the circle, uses
/// time step dt_scale * r^2 and stops at max(stop_ratio * eps, 3 sqrt(dt_scale)) * r
/// from the root, so every stratum is a rescaled copy of the unit problem.
/// A stop ball smaller than a few Euler steps lets the walk overshoot the root
/// and drift back into the bulk, which inflates occupation times.
struct LoopSpec {
  double eps = 0.05;
  double dt_scale = 1e-5;
  double stop_ratio = 0.1;
  double r_min = 0.0;
  int strata = 8;
  std::size_t max_steps = sampler::kDefaultMaxSteps;

  /// Throws ConfigError unless eps in (0, 0.1), dt_scale in (0, eps^2 / 36],
  /// stop_ratio in (0, 1], r_min in [0, 1).
  void validate() const;
  sampler::LoopRootConfig root_config(double r, double theta) const;
};

/// lambda(F) with per-loop weight pi (1 - r_min^2) h_{U_r}(x_0, z) / (eps r);
/// stratified mean and standard error.
Estimate mc_loop_expectation(const PathFunctional& F, const LoopSpec& spec, std::size_t n,
                             const RunOptions& opt);

/// lambda(occ(A) occ(B)) with target int int_{AxB} G^2. r_min is raised to
/// the larger of the two regions' smallest modulus, since loops rooted on a
/// smaller circle cannot visit both.
Estimate loop_covariance(const Region& A, const Region& B, LoopSpec spec, std::size_t n,
                         const RunOptions& opt, const analytic::QuadratureSpec& quad = {8, 6, 1e-6});

/// Independent pairs of excursions: (2 pi / eps)^2 T(A) T(B) with T the
/// mollified pair intersection; target 16 int int_{AxB} G^2.
Estimate pair_intersection_covariance(const Region& A, const Region& B,
                                      const sampler::ExcursionConfig& cfg, std::size_t n_pairs,
                                      double eps_moll, const RunOptions& opt,
                                      const analytic::QuadratureSpec& quad = {8, 6, 1e-6});

/// U-statistic over all pairs of a pool of excursions. The lens kernel is
/// written as int dy delta_y(a) delta_y(b) and the y-integral is taken on a
/// randomly shifted grid of spacing grid_factor * eps_moll over A and over B,
/// so each pair costs one inner product of occupation vectors. The standard
/// error comes from the Hoeffding decomposition of the U-statistic.
Estimate pair_intersection_pooled(const Region& A, const Region& B,
                                  const sampler::ExcursionConfig& cfg, std::size_t pool,
                                  double eps_moll, const RunOptions& opt,
                                  double grid_factor = 0.5,
                                  const analytic::QuadratureSpec& quad = {8, 6, 1e-6});

}  // namespace occupation::estimators
