#pragma once

#include <span>

#include "occupation/region.hpp"

namespace occupation::analytic {

/// Points may sit this far off a circle and still count as on it.
inline constexpr double kCircleTolerance = 1e-9;

/// Dirichlet Green's function of the disc of radius r, normalized so that
/// G(x, y) ~ log(1/|x - y|) / pi on the diagonal.
///
/// Throws DomainError for coincident points or points outside the open disc.
double green_disc(Point x, Point y, double r = 1.0);

/// Poisson kernel h(x, z) of the radius-r disc: density of the exit point at
/// z (on the circle, arc-length measure) for Brownian motion started at x.
double poisson_kernel_disc(Point x, Point z, double r = 1.0);

/// Automorphism z -> e^{i phase} (z - pole) / (1 - conj(pole) z) of the unit disc.
struct MoebiusMap {
  Point pole{0.0, 0.0};
  double phase = 0.0;

  MoebiusMap() = default;
  MoebiusMap(Point pole_, double phase_);

  /// The automorphism undoing this one.
  MoebiusMap inverse() const;
};

struct MoebiusImage {
  Point image;
  double derivative_modulus;
};

/// Evaluate the map (or its inverse) and |d image / dz| at z with |z| <= 1.
MoebiusImage moebius_eval(const MoebiusMap& m, Point z, bool inverse = false);

/// Image of a disc contained in the open unit disc; the result is again a disc.
Disc moebius_image(const MoebiusMap& m, const Disc& d);

/// Poisson-integral solution of the Dirichlet problem in the unit disc.
///
/// boundary_values[k] is f(e^{2 pi i k / N}); integration uses the periodic
/// trapezoid rule, spectrally accurate for smooth f. Needs N >= 8.
double harmonic_extension(std::span<const double> boundary_values, Point x);

/// Kernel 4 * int_0^{2 pi} h_r(x, r e^{it}) h_r(y, r e^{it}) dt, evaluated by the
/// periodic trapezoid rule with node doubling (starting at 512 nodes) until
/// the relative change drops below 1e-13.
double kernel_K(double r, Point x, Point y);

/// Radial chain int_{y0}^{1} (1/r) G(0, y0/r) K(0, y0/r) dr evaluated with
/// green_disc and kernel_K at Gauss-Legendre nodes. Relative accuracy 1e-9
/// or PrecisionError.
double loop_F_chain(double y0);

}  // namespace occupation::analytic
