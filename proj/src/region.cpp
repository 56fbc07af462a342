#include "occupation/region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "occupation/errors.hpp"

namespace occupation {

namespace {

// Distance from p to the rectangle (0 inside).
double rect_outside_distance(const Rect& r, Point p) {
  const double dx = std::max({r.lo.real() - p.real(), 0.0, p.real() - r.hi.real()});
  const double dy = std::max({r.lo.imag() - p.imag(), 0.0, p.imag() - r.hi.imag()});
  return std::hypot(dx, dy);
}

bool rect_contains(const Rect& r, Point p) {
  return p.real() >= r.lo.real() && p.real() <= r.hi.real() && p.imag() >= r.lo.imag() &&
         p.imag() <= r.hi.imag();
}

}  // namespace

Region Region::disc(Point center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius) || !std::isfinite(center.real()) ||
      !std::isfinite(center.imag())) {
    throw ConfigError("disc region needs a finite center and radius > 0");
  }
  Region r;
  r.shape_ = Disc{center, radius};
  return r;
}

Region Region::rect(Point lo, Point hi) {
  if (!(lo.real() < hi.real()) || !(lo.imag() < hi.imag())) {
    throw ConfigError("rectangle region needs lo < hi componentwise");
  }
  Region r;
  r.shape_ = Rect{lo, hi};
  return r;
}

bool Region::contains(Point p) const noexcept {
  if (const auto* d = as_disc()) {
    return std::norm(p - d->center) <= d->radius * d->radius;
  }
  if (const auto* r = as_rect()) {
    return rect_contains(*r, p);
  }
  return false;
}

double Region::area() const noexcept {
  if (const auto* d = as_disc()) {
    return kPi * d->radius * d->radius;
  }
  if (const auto* r = as_rect()) {
    return (r->hi.real() - r->lo.real()) * (r->hi.imag() - r->lo.imag());
  }
  return 0.0;
}

BoundingBox Region::bounding_box() const {
  if (const auto* d = as_disc()) {
    const Point half{d->radius, d->radius};
    return {d->center - half, d->center + half};
  }
  if (const auto* r = as_rect()) {
    return {r->lo, r->hi};
  }
  throw DomainError("empty region has no bounding box");
}

double Region::boundary_distance(Point p) const noexcept {
  if (const auto* d = as_disc()) {
    return std::abs(std::abs(p - d->center) - d->radius);
  }
  if (const auto* r = as_rect()) {
    if (!rect_contains(*r, p)) {
      return rect_outside_distance(*r, p);
    }
    return std::min({p.real() - r->lo.real(), r->hi.real() - p.real(), p.imag() - r->lo.imag(),
                     r->hi.imag() - p.imag()});
  }
  return std::numeric_limits<double>::infinity();
}

double Region::min_modulus() const noexcept {
  if (const auto* d = as_disc()) {
    return std::max(0.0, std::abs(d->center) - d->radius);
  }
  if (const auto* r = as_rect()) {
    return rect_outside_distance(*r, Point{0.0, 0.0});
  }
  return std::numeric_limits<double>::infinity();
}

double Region::max_modulus() const noexcept {
  if (const auto* d = as_disc()) {
    return std::abs(d->center) + d->radius;
  }
  if (const auto* r = as_rect()) {
    const double x = std::max(std::abs(r->lo.real()), std::abs(r->hi.real()));
    const double y = std::max(std::abs(r->lo.imag()), std::abs(r->hi.imag()));
    return std::hypot(x, y);
  }
  return 0.0;
}

double Region::gap_to(const Region& other) const {
  if (is_empty() || other.is_empty()) {
    return std::numeric_limits<double>::infinity();
  }
  const auto* d1 = as_disc();
  const auto* d2 = other.as_disc();
  if (d1 && d2) {
    return std::max(0.0, std::abs(d1->center - d2->center) - d1->radius - d2->radius);
  }
  if (d1 || d2) {
    const Disc& d = d1 ? *d1 : *d2;
    const Rect& r = d1 ? *other.as_rect() : *as_rect();
    return std::max(0.0, rect_outside_distance(r, d.center) - d.radius);
  }
  const Rect& a = *as_rect();
  const Rect& b = *other.as_rect();
  const double dx = std::max({a.lo.real() - b.hi.real(), b.lo.real() - a.hi.real(), 0.0});
  const double dy = std::max({a.lo.imag() - b.hi.imag(), b.lo.imag() - a.hi.imag(), 0.0});
  return std::hypot(dx, dy);
}

std::string Region::describe() const {
  std::ostringstream os;
  os.precision(9);
  if (const auto* d = as_disc()) {
    os << "disc(" << d->center.real() << "," << d->center.imag() << ";" << d->radius << ")";
  } else if (const auto* r = as_rect()) {
    os << "rect(" << r->lo.real() << "," << r->lo.imag() << ";" << r->hi.real() << ","
       << r->hi.imag() << ")";
  } else {
    os << "empty";
  }
  return os.str();
}

bool operator==(const Region& a, const Region& b) {
  if (a.shape_.index() != b.shape_.index()) {
    return false;
  }
  if (const auto* d = a.as_disc()) {
    const auto* e = b.as_disc();
    return d->center == e->center && d->radius == e->radius;
  }
  if (const auto* r = a.as_rect()) {
    const auto* s = b.as_rect();
    return r->lo == s->lo && r->hi == s->hi;
  }
  return true;
}

}  // namespace occupation
