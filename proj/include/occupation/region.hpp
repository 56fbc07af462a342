#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>

namespace occupation {

/// Planar point in complex notation; unit-disc scale throughout.
using Point = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

struct Disc {
  Point center;
  double radius;
};

struct Rect {
  Point lo;
  Point hi;
};

struct BoundingBox {
  Point lo;
  Point hi;
};

/// Closed planar region: a disc, an axis-aligned rectangle, or the empty set.
///
/// Membership includes the region's own boundary. Regions are small value
/// types; copy them freely.
class Region {
 public:
  /// The empty region (zero area, contains nothing).
  Region() = default;

  static Region disc(Point center, double radius);
  static Region rect(Point lo, Point hi);
  static Region empty() { return Region{}; }

  bool is_empty() const noexcept { return std::holds_alternative<std::monostate>(shape_); }
  bool contains(Point p) const noexcept;
  double area() const noexcept;
  BoundingBox bounding_box() const;

  /// Unsigned distance from p to the region's boundary curve.
  double boundary_distance(Point p) const noexcept;

  /// Smallest and largest |p| over the region.
  double min_modulus() const noexcept;
  double max_modulus() const noexcept;

  /// Positive distance between the two regions, 0 when they touch or overlap.
  double gap_to(const Region& other) const;

  bool inside_disc(double radius) const noexcept { return !is_empty() && max_modulus() < radius; }

  const Disc* as_disc() const noexcept { return std::get_if<Disc>(&shape_); }
  const Rect* as_rect() const noexcept { return std::get_if<Rect>(&shape_); }

  std::string describe() const;

  friend bool operator==(const Region& a, const Region& b);

 private:
  std::variant<std::monostate, Disc, Rect> shape_;
};

}  // namespace occupation
