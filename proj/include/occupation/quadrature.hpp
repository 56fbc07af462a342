#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "occupation/region.hpp"

namespace occupation::analytic {

/// Controls the area quadrature. Level k of the rule uses Gauss-Legendre
/// order base_resolution + 4k on every panel; levels are added until two
/// consecutive results agree to `tolerance` (relative) or `max_refinements`
/// extra levels have been spent.
struct QuadratureSpec {
  int base_resolution = 8;
  int max_refinements = 6;
  double tolerance = 1e-8;

  /// Throws ConfigError unless base_resolution >= 8 and tolerance in (0, 0.1).
  void validate() const;
};

struct QuadResult {
  double value = 0.0;
  /// Difference between the last two levels.
  double error_estimate = 0.0;
  int levels = 0;
};

/// Integral of G_U(x, y)^p over x in A, y in B for 1 <= p <= 6.
///
/// The inner integral over B is taken in polar coordinates around x, which
/// absorbs the logarithmic singularity at x = y; radial panels are graded
/// geometrically toward x so overlapping or touching regions are handled.
/// Throws DomainError when a region leaves the unit disc and PrecisionError
/// (with the last two levels) when the tolerance is not reached.
QuadResult quad_green_power(const Region& A, const Region& B, int p,
                            const QuadratureSpec& spec = {});

/// Chained Green integral over x_1 in A_1, ..., x_k in A_k of
/// G(x_1, x_2) ... G(x_{k-1}, x_k), for k = 2 or 3.
QuadResult quad_green_chain(std::span<const Region> regions, const QuadratureSpec& spec = {});

/// Piecewise-constant density: sum of weight * indicator(region).
struct Density {
  std::vector<std::pair<Region, double>> terms;

  static Density indicator(const Region& r) { return Density{{{r, 1.0}}}; }
  bool is_zero() const;
  /// Integral of the density over the plane.
  double mass() const;
  double operator()(Point p) const;
};

/// GFF covariance (1/2) * int int G_U(x, y) rho1(x) rho2(y) dx dy.
QuadResult gff_covariance(const Density& rho1, const Density& rho2,
                          const QuadratureSpec& spec = {});

/// int int G_U^p rho1 rho2, the bilinear extension of quad_green_power.
QuadResult quad_green_power(const Density& rho1, const Density& rho2, int p,
                            const QuadratureSpec& spec = {});

/// Integral of f over a region using a Gauss-Legendre rule of the given order
/// (polar for discs, tensor for rectangles), split into `panels` pieces per axis.
double integrate_over(const Region& region, const std::function<double(Point)>& f, int order = 20,
                      int panels = 2);

}  // namespace occupation::analytic
