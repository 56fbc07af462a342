#include "occupation/kernels.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <vector>

#include "occupation/errors.hpp"

namespace occupation::analytic {

namespace {

void require_inside(Point x, double r, const char* what) {
  if (!(std::abs(x) < r)) {
    throw DomainError(std::string(what) + ": point not inside the open disc");
  }
}

void require_radius(double r) {
  if (!(r > 0.0 && r <= 1.0)) {
    throw DomainError("disc radius must lie in (0, 1]");
  }
}

}  // namespace

double green_disc(Point x, Point y, double r) {
  require_radius(r);
  require_inside(x, r, "green_disc");
  require_inside(y, r, "green_disc");
  if (x == y) {
    throw DomainError("green_disc: coincident points");
  }
  const Point a = x / r;
  const Point b = y / r;
  // |1 - a conj(b)|^2 - |a - b|^2 = (1 - |a|^2)(1 - |b|^2), which keeps the
  // ratio accurate when both points hug the circle.
  const double num = (1.0 - std::norm(a)) * (1.0 - std::norm(b));
  return std::log1p(num / std::norm(a - b)) / (2.0 * kPi);
}

double poisson_kernel_disc(Point x, Point z, double r) {
  require_radius(r);
  require_inside(x, r, "poisson_kernel_disc");
  if (std::abs(std::abs(z) - r) > kCircleTolerance) {
    throw DomainError("poisson_kernel_disc: boundary point off the circle");
  }
  return (r * r - std::norm(x)) / (2.0 * kPi * r * std::norm(x - z));
}

MoebiusMap::MoebiusMap(Point pole_, double phase_) : pole(pole_), phase(phase_) {
  if (!(std::abs(pole_) < 1.0) || !std::isfinite(phase_)) {
    throw DomainError("Moebius pole must lie in the open unit disc");
  }
}

MoebiusMap MoebiusMap::inverse() const {
  return MoebiusMap(-pole * std::polar(1.0, phase), -phase);
}

MoebiusImage moebius_eval(const MoebiusMap& m, Point z, bool inverse) {
  if (std::abs(z) > 1.0 + kCircleTolerance) {
    throw DomainError("moebius_eval: point outside the closed unit disc");
  }
  const MoebiusMap f = inverse ? m.inverse() : m;
  const Point denom = 1.0 - std::conj(f.pole) * z;
  const Point image = std::polar(1.0, f.phase) * (z - f.pole) / denom;
  return {image, (1.0 - std::norm(f.pole)) / std::norm(denom)};
}

Disc moebius_image(const MoebiusMap& m, const Disc& d) {
  if (!(std::abs(d.center) + d.radius < 1.0)) {
    throw DomainError("moebius_image: disc must lie inside the unit disc");
  }
  if (m.pole == Point{0.0, 0.0}) {
    return {std::polar(1.0, m.phase) * d.center, d.radius};
  }
  // The line through the center and the preimage of infinity (1 / conj(pole))
  // is orthogonal to the circle and maps to a line through the image center,
  // so its two crossing points map to a diameter.
  Point dir = (1.0 - d.center * std::conj(m.pole)) * m.pole;
  dir /= std::abs(dir);
  const Point p1 = moebius_eval(m, d.center + d.radius * dir).image;
  const Point p2 = moebius_eval(m, d.center - d.radius * dir).image;
  return {0.5 * (p1 + p2), 0.5 * std::abs(p1 - p2)};
}

double harmonic_extension(std::span<const double> boundary_values, Point x) {
  const std::size_t n = boundary_values.size();
  if (n < 8) {
    throw ConfigError("harmonic_extension needs at least 8 boundary nodes");
  }
  require_inside(x, 1.0, "harmonic_extension");
  const double dtheta = 2.0 * kPi / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Point z = std::polar(1.0, dtheta * static_cast<double>(k));
    sum += poisson_kernel_disc(x, z, 1.0) * boundary_values[k];
  }
  return sum * dtheta;
}

double kernel_K(double r, Point x, Point y) {
  require_radius(r);
  require_inside(x, r, "kernel_K");
  require_inside(y, r, "kernel_K");
  // |p - r e^{it}|^2 = (r - |p|)^2 + 4 r |p| sin^2((t - arg p) / 2) keeps the
  // peak of the kernel accurate when p hugs the circle.
  auto kernel = [r](Point p, double t) {
    const double m = std::abs(p);
    const double s = std::sin(0.5 * (t - std::arg(p)));
    const double dist2 = (r - m) * (r - m) + 4.0 * r * m * s * s;
    return (r - m) * (r + m) / (2.0 * kPi * r * dist2);
  };
  auto integrand = [&](double t) { return kernel(x, t) * kernel(y, t); };

  // Compensated summation: near-boundary points need millions of nodes.
  double sum = 0.0;
  double carry = 0.0;
  auto add = [&](double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  };
  std::size_t n = 512;
  for (std::size_t k = 0; k < n; ++k) {
    add(integrand(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n)));
  }
  double value = 4.0 * (sum + carry) * 2.0 * kPi / static_cast<double>(n);
  constexpr std::size_t kMaxNodes = std::size_t{1} << 24;
  while (n < kMaxNodes) {
    // Doubling reuses the old nodes; only the midpoints are new.
    for (std::size_t k = 0; k < n; ++k) {
      add(integrand(2.0 * kPi * (static_cast<double>(k) + 0.5) / static_cast<double>(n)));
    }
    n *= 2;
    const double next = 4.0 * (sum + carry) * 2.0 * kPi / static_cast<double>(n);
    const bool converged = std::abs(next - value) <= 1e-13 * std::abs(next);
    value = next;
    if (converged) {
      return value;
    }
  }
  throw PrecisionError("kernel_K: trapezoid rule did not converge", value, value);
}

double loop_F_chain(double y0) {
  if (!(y0 > 0.0 && y0 < 1.0)) {
    throw DomainError("loop_F_chain: y0 must lie in (0, 1)");
  }
  auto integrand = [y0](double r) {
    const Point y{y0 / r, 0.0};
    return green_disc(Point{0.0, 0.0}, y, 1.0) * kernel_K(1.0, Point{0.0, 0.0}, y) / r;
  };
  auto composite = [&](auto rule, int panels) {
    double total = 0.0;
    const double width = (1.0 - y0) / panels;
    for (int k = 0; k < panels; ++k) {
      const double lo = y0 + k * width;
      total += rule.integrate(integrand, lo, lo + width);
    }
    return total;
  };
  using Coarse = boost::math::quadrature::gauss<double, 15>;
  using Fine = boost::math::quadrature::gauss<double, 20>;
  const double coarse = composite(Coarse{}, 2);
  const double fine = composite(Fine{}, 3);
  if (std::abs(fine - coarse) > 1e-9 * std::abs(fine) + 1e-15) {
    throw PrecisionError("loop_F_chain: radial quadrature did not converge", coarse, fine);
  }
  return fine;
}

}  // namespace occupation::analytic
