#include "occupation/quadrature.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>
#include <mutex>

#include "occupation/errors.hpp"

namespace occupation::analytic {

namespace {

struct GaussRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

template <unsigned N>
GaussRule make_rule() {
  static_assert(N % 2 == 0, "only even orders are tabulated");
  using G = boost::math::quadrature::gauss<double, N>;
  GaussRule rule;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    rule.x.push_back(-a[i]);
    rule.w.push_back(w[i]);
    rule.x.push_back(a[i]);
    rule.w.push_back(w[i]);
  }
  return rule;
}

GaussRule build_rule(int order) {
  switch (order) {
    case 8: return make_rule<8>();
    case 12: return make_rule<12>();
    case 16: return make_rule<16>();
    case 20: return make_rule<20>();
    case 24: return make_rule<24>();
    case 28: return make_rule<28>();
    case 32: return make_rule<32>();
    case 36: return make_rule<36>();
    case 40: return make_rule<40>();
    case 44: return make_rule<44>();
    case 48: return make_rule<48>();
    case 52: return make_rule<52>();
    case 56: return make_rule<56>();
    case 60: return make_rule<60>();
    case 64: return make_rule<64>();
    default: break;
  }
  throw ConfigError("Gauss-Legendre order must be a multiple of 4 in [8, 64]");
}

const GaussRule& gauss_rule(int order) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, build_rule(order)).first;
  }
  return it->second;
}

// Grading ratio for geometric panels toward a singular point.
constexpr double kSigma = 0.2;
// The innermost radial panel [0, 1e-7 * chord] carries a negligible share of
// the s log(s)^p mass and is integrated by a plain Gauss panel.
constexpr int kRadialLevels = 10;

// Unit-disc Green's function without argument checks, for inner loops; s is
// |a - b|, passed separately because a + s u may round to a for tiny s.
inline double green_fast(Point a, Point b, double s) {
  const double num = (1.0 - std::norm(a)) * (1.0 - std::norm(b));
  return std::log1p(num / (s * s)) / (2.0 * kPi);
}

inline double ipow(double v, int p) {
  double r = v;
  for (int k = 1; k < p; ++k) {
    r *= v;
  }
  return r;
}

template <class F>
double gauss_panel(const GaussRule& g, double a, double b, F&& f) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    sum += g.w[i] * f(mid + half * g.x[i]);
  }
  return sum * half;
}

// Breakpoints of [a, b] graded geometrically toward the chosen ends.
std::vector<double> graded_breaks(double a, double b, int left_levels, int right_levels) {
  std::vector<double> br;
  const double len = b - a;
  br.push_back(a);
  for (int j = left_levels; j >= 1; --j) {
    br.push_back(a + 0.5 * len * std::pow(kSigma, j));
  }
  br.push_back(a + 0.5 * len);
  for (int j = 1; j <= right_levels; ++j) {
    br.push_back(b - 0.5 * len * std::pow(kSigma, j));
  }
  br.push_back(b);
  return br;
}

int levels_for(double closeness) {
  // Number of geometric levels needed to resolve a singularity sitting
  // `closeness` (relative) away from a panel end.
  if (!(closeness < 0.5)) {
    return 0;
  }
  const int j = static_cast<int>(std::ceil(std::log(closeness) / std::log(kSigma)));
  return std::clamp(j, 0, 14);
}

// Parameter interval of the ray x + s u inside the region, s >= 0.
bool clip_ray(const Region& B, Point x, Point u, double& s_in, double& s_out) {
  if (const Disc* d = B.as_disc()) {
    const Point w = x - d->center;
    const double b = w.real() * u.real() + w.imag() * u.imag();
    const double disc = b * b - (std::norm(w) - d->radius * d->radius);
    if (disc <= 0.0) {
      return false;
    }
    const double sq = std::sqrt(disc);
    s_out = -b + sq;
    s_in = std::max(0.0, -b - sq);
    return s_out > s_in;
  }
  const Rect& r = *B.as_rect();
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  const std::array<double, 2> origin{x.real(), x.imag()};
  const std::array<double, 2> dir{u.real(), u.imag()};
  const std::array<double, 2> rlo{r.lo.real(), r.lo.imag()};
  const std::array<double, 2> rhi{r.hi.real(), r.hi.imag()};
  for (int k = 0; k < 2; ++k) {
    if (dir[k] == 0.0) {
      if (origin[k] < rlo[k] || origin[k] > rhi[k]) {
        return false;
      }
      continue;
    }
    double t1 = (rlo[k] - origin[k]) / dir[k];
    double t2 = (rhi[k] - origin[k]) / dir[k];
    if (t1 > t2) {
      std::swap(t1, t2);
    }
    lo = std::max(lo, t1);
    hi = std::min(hi, t2);
  }
  s_in = lo;
  s_out = hi;
  return s_out > s_in;
}

// Integral of s f(x + s u) over [s_in, s_out], graded toward s = 0.
template <class F>
double radial_integral(const GaussRule& g, Point x, Point u, double s_in, double s_out, F&& f) {
  auto integrand = [&](double s) { return s * f(x + s * u, s); };
  double total = 0.0;
  double upper = s_out;
  for (int j = 1; j <= kRadialLevels; ++j) {
    const double br = s_out * std::pow(kSigma, j);
    if (br <= s_in) {
      break;
    }
    total += gauss_panel(g, br, upper, integrand);
    upper = br;
  }
  total += gauss_panel(g, s_in, upper, integrand);
  return total;
}

// Integral of f over B in polar coordinates around x.
template <class F>
double polar_integral(const Region& B, Point x, const GaussRule& g, F&& f) {
  double s_in = 0.0;
  double s_out = 0.0;
  auto along = [&](double psi) {
    const Point u = std::polar(1.0, psi);
    if (!clip_ray(B, x, u, s_in, s_out)) {
      return 0.0;
    }
    return radial_integral(g, x, u, s_in, s_out, f);
  };
  auto over_breaks = [&](const std::vector<double>& br, auto&& h) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      total += gauss_panel(g, br[k], br[k + 1], h);
    }
    return total;
  };

  if (const Disc* d = B.as_disc()) {
    const Point w = x - d->center;
    const double dist = std::abs(w);
    const double R = d->radius;
    if (dist < R) {
      // Inside: the chord length has nearby complex singularities at the
      // two directions perpendicular to w when x approaches the edge.
      const double phi0 = dist > 0.0 ? std::arg(w) : 0.0;
      const double closeness = std::sqrt(std::max(0.0, 1.0 - (dist / R) * (dist / R)));
      const int lev = dist > 0.0 ? levels_for(closeness) : 0;
      double total = 0.0;
      for (double start : {phi0 - 0.5 * kPi, phi0 + 0.5 * kPi}) {
        total += over_breaks(graded_breaks(start, start + kPi, lev, lev), along);
      }
      return total;
    }
    // Outside: the visible cone [beta - alpha, beta + alpha]; psi = beta + alpha sin t
    // removes the square-root endpoint behaviour of the chord.
    const double beta = std::arg(-w);
    const double alpha = std::asin(std::min(1.0, R / dist));
    const int lev = levels_for(std::sqrt((dist - R) / R));
    auto mapped = [&](double t) { return along(beta + alpha * std::sin(t)) * alpha * std::cos(t); };
    return over_breaks(graded_breaks(-0.5 * kPi, 0.0, 0, lev), mapped) +
           over_breaks(graded_breaks(0.0, 0.5 * kPi, lev, 0), mapped);
  }

  const Rect& r = *B.as_rect();
  const std::array<Point, 4> corners{r.lo, Point{r.hi.real(), r.lo.imag()}, r.hi,
                                     Point{r.lo.real(), r.hi.imag()}};
  const double size = std::max(r.hi.real() - r.lo.real(), r.hi.imag() - r.lo.imag());
  const double closeness = B.boundary_distance(x) / size;
  const int lev = levels_for(closeness);
  std::vector<double> angles;
  if (B.contains(x)) {
    for (const Point& c : corners) {
      if (c != x) {
        angles.push_back(std::arg(c - x));
      }
    }
    std::sort(angles.begin(), angles.end());
    angles.push_back(angles.front() + 2.0 * kPi);
  } else {
    const Point center = 0.5 * (r.lo + r.hi);
    const double ref = std::arg(center - x);
    for (const Point& c : corners) {
      angles.push_back(ref + std::remainder(std::arg(c - x) - ref, 2.0 * kPi));
    }
    std::sort(angles.begin(), angles.end());
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < angles.size(); ++k) {
    if (angles[k + 1] > angles[k]) {
      total += over_breaks(graded_breaks(angles[k], angles[k + 1], lev, lev), along);
    }
  }
  return total;
}

// Sorted breakpoints of [a, b] with the crossings of a ray added.
std::vector<double> with_crossings(double a, double b, const Region* kink, Point origin, Point dir) {
  std::vector<double> br{a, 0.5 * (a + b), b};
  double s_in = 0.0;
  double s_out = 0.0;
  if (kink != nullptr && clip_ray(*kink, origin, dir, s_in, s_out)) {
    for (double s : {s_in, s_out}) {
      if (s > a && s < b) {
        br.push_back(s);
      }
    }
    std::sort(br.begin(), br.end());
  }
  return br;
}

// Integral of f over A. When f has a kink along the edge of `kink`, each
// radial (or vertical) line is split where it crosses that edge.
template <class F>
double area_rule(const Region& A, const GaussRule& g, const Region* kink, F&& f) {
  const int q = static_cast<int>(g.x.size());
  if (const Disc* d = A.as_disc()) {
    const int m = 4 * q;
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
      const Point dir = std::polar(1.0, 2.0 * kPi * (k + 0.5) / m);
      const std::vector<double> br = with_crossings(0.0, d->radius, kink, d->center, dir);
      for (std::size_t j = 0; j + 1 < br.size(); ++j) {
        total += gauss_panel(g, br[j], br[j + 1],
                             [&](double rho) { return rho * f(d->center + rho * dir); });
      }
    }
    return total * 2.0 * kPi / m;
  }
  const Rect& r = *A.as_rect();
  std::vector<double> bx{r.lo.real(), 0.5 * (r.lo.real() + r.hi.real()), r.hi.real()};
  if (kink != nullptr) {
    const BoundingBox box = kink->bounding_box();
    for (double v : {box.lo.real(), box.hi.real()}) {
      if (v > r.lo.real() && v < r.hi.real()) {
        bx.push_back(v);
      }
    }
    std::sort(bx.begin(), bx.end());
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < bx.size(); ++i) {
    total += gauss_panel(g, bx[i], bx[i + 1], [&](double px) {
      const Point base{px, r.lo.imag()};
      const std::vector<double> by =
          with_crossings(0.0, r.hi.imag() - r.lo.imag(), kink, base, Point{0.0, 1.0});
      double col = 0.0;
      for (std::size_t j = 0; j + 1 < by.size(); ++j) {
        col += gauss_panel(g, by[j], by[j + 1], [&](double t) { return f(base + Point{0.0, t}); });
      }
      return col;
    });
  }
  return total;
}

void require_in_unit_disc(const Region& r) {
  if (!r.is_empty() && r.max_modulus() > 1.0) {
    throw DomainError("region " + r.describe() + " leaves the unit disc");
  }
}

template <class LevelFn>
QuadResult iterate_levels(const QuadratureSpec& spec, const char* what, LevelFn&& level) {
  spec.validate();
  double prev = level(spec.base_resolution);
  for (int k = 1; k <= spec.max_refinements; ++k) {
    const double next = level(spec.base_resolution + 4 * k);
    const double err = std::abs(next - prev);
    if (err <= spec.tolerance * std::abs(next) || next == 0.0) {
      return {next, err, k + 1};
    }
    if (k == spec.max_refinements) {
      throw PrecisionError(std::string(what) + ": tolerance not reached", prev, next);
    }
    prev = next;
  }
  throw PrecisionError(std::string(what) + ": no refinement levels allowed", prev, prev);
}

}  // namespace

void QuadratureSpec::validate() const {
  if (base_resolution < 8 || base_resolution % 4 != 0) {
    throw ConfigError("quadrature base resolution must be a multiple of 4 and >= 8");
  }
  if (!(tolerance > 0.0 && tolerance < 0.1)) {
    throw ConfigError("quadrature tolerance must lie in (0, 0.1)");
  }
  if (max_refinements < 1 || base_resolution + 4 * max_refinements > 64) {
    throw ConfigError("quadrature refinement depth must keep the order <= 64");
  }
}

QuadResult quad_green_power(const Region& A, const Region& B, int p, const QuadratureSpec& spec) {
  if (p < 1 || p > 6) {
    throw ConfigError("quad_green_power: p must lie in [1, 6]");
  }
  spec.validate();
  if (A.is_empty() || B.is_empty()) {
    return {};
  }
  require_in_unit_disc(A);
  require_in_unit_disc(B);
  // One-sided restrictions of the inner potential are smooth, so only a
  // partial overlap puts a kink inside A.
  const Region* kink = (A.gap_to(B) > 0.0 || A == B) ? nullptr : &B;
  return iterate_levels(spec, "quad_green_power", [&](int order) {
    const GaussRule& g = gauss_rule(order);
    return area_rule(A, g, kink, [&](Point x) {
      return polar_integral(B, x, g,
                            [&](Point y, double s) { return ipow(green_fast(x, y, s), p); });
    });
  });
}

QuadResult quad_green_chain(std::span<const Region> regions, const QuadratureSpec& spec) {
  if (regions.size() == 2) {
    return quad_green_power(regions[0], regions[1], 1, spec);
  }
  if (regions.size() != 3) {
    throw ConfigError("quad_green_chain supports chains of 2 or 3 regions");
  }
  spec.validate();
  for (const Region& r : regions) {
    if (r.is_empty()) {
      return {};
    }
    require_in_unit_disc(r);
  }
  const Region& mid = regions[1];
  auto straddles = [&](const Region& other) { return !(mid.gap_to(other) > 0.0 || mid == other); };
  if (straddles(regions[0]) && straddles(regions[2]) && !(regions[0] == regions[2])) {
    throw ConfigError("quad_green_chain: the middle region may straddle at most one other region");
  }
  const Region* kink = straddles(regions[0]) ? &regions[0] : (straddles(regions[2]) ? &regions[2] : nullptr);
  return iterate_levels(spec, "quad_green_chain", [&](int order) {
    const GaussRule& g = gauss_rule(order);
    return area_rule(mid, g, kink, [&](Point x) {
      auto green = [&](Point y, double s) { return green_fast(x, y, s); };
      return polar_integral(regions[0], x, g, green) * polar_integral(regions[2], x, g, green);
    });
  });
}

bool Density::is_zero() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const auto& t) { return t.second == 0.0 || t.first.is_empty(); });
}

double Density::mass() const {
  double m = 0.0;
  for (const auto& [region, weight] : terms) {
    m += weight * region.area();
  }
  return m;
}

double Density::operator()(Point p) const {
  double v = 0.0;
  for (const auto& [region, weight] : terms) {
    if (region.contains(p)) {
      v += weight;
    }
  }
  return v;
}

QuadResult quad_green_power(const Density& rho1, const Density& rho2, int p,
                            const QuadratureSpec& spec) {
  QuadResult out;
  for (const auto& [r1, w1] : rho1.terms) {
    for (const auto& [r2, w2] : rho2.terms) {
      if (w1 == 0.0 || w2 == 0.0) {
        continue;
      }
      const QuadResult q = quad_green_power(r1, r2, p, spec);
      out.value += w1 * w2 * q.value;
      out.error_estimate += std::abs(w1 * w2) * q.error_estimate;
      out.levels = std::max(out.levels, q.levels);
    }
  }
  return out;
}

QuadResult gff_covariance(const Density& rho1, const Density& rho2, const QuadratureSpec& spec) {
  QuadResult q = quad_green_power(rho1, rho2, 1, spec);
  q.value *= 0.5;
  q.error_estimate *= 0.5;
  return q;
}

double integrate_over(const Region& region, const std::function<double(Point)>& f, int order,
                      int panels) {
  if (region.is_empty()) {
    return 0.0;
  }
  if (panels < 1) {
    throw ConfigError("integrate_over needs at least one panel");
  }
  const GaussRule& g = gauss_rule(order);
  if (const Disc* d = region.as_disc()) {
    const int m = 4 * order;
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
      const Point dir = std::polar(1.0, 2.0 * kPi * (k + 0.5) / m);
      for (int j = 0; j < panels; ++j) {
        const double a = d->radius * j / panels;
        const double b = d->radius * (j + 1) / panels;
        total += gauss_panel(g, a, b, [&](double rho) { return rho * f(d->center + rho * dir); });
      }
    }
    return total * 2.0 * kPi / m;
  }
  const Rect& r = *region.as_rect();
  const double wx = (r.hi.real() - r.lo.real()) / panels;
  const double wy = (r.hi.imag() - r.lo.imag()) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    for (int j = 0; j < panels; ++j) {
      const double x0 = r.lo.real() + i * wx;
      const double y0 = r.lo.imag() + j * wy;
      total += gauss_panel(g, x0, x0 + wx, [&](double px) {
        return gauss_panel(g, y0, y0 + wy, [&](double py) { return f(Point{px, py}); });
      });
    }
  }
  return total;
}

}  // namespace occupation::analytic
