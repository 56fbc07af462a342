#include "occupation/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "bridge.hpp"
#include "occupation/errors.hpp"

namespace occupation::sampler {

void ExcursionConfig::validate() const {
  if (!(eps_start > 1e-4 && eps_start < 0.2)) {
    throw ConfigError("eps_start must lie in (1e-4, 0.2)");
  }
  if (!(dt > 0.0 && dt <= eps_start * eps_start / 4.0)) {
    throw ConfigError("dt must lie in (0, eps_start^2 / 4]");
  }
  if (max_steps < 1) {
    throw ConfigError("max_steps must be positive");
  }
}

Point LoopRootConfig::root() const { return std::polar(r, theta); }

void LoopRootConfig::validate() const {
  if (!(r > 0.0 && r <= 1.0)) {
    throw ConfigError("loop root radius must lie in (0, 1]");
  }
  if (!(eps_offset > 0.0 && eps_offset < r / 10.0)) {
    throw ConfigError("eps_offset must lie in (0, r / 10)");
  }
  if (!(stop_radius > 0.0 && stop_radius <= eps_offset)) {
    throw ConfigError("stop_radius must lie in (0, eps_offset]");
  }
  if (!(dt > 0.0 && dt <= eps_offset * eps_offset / 4.0)) {
    throw ConfigError("loop dt must lie in (0, eps_offset^2 / 4]");
  }
  if (max_steps < 1 || !std::isfinite(theta)) {
    throw ConfigError("loop config needs max_steps >= 1 and a finite angle");
  }
}

Path sample_bm_until_exit(Point start, double disc_radius, double dt, RngStream& rng,
                          std::size_t max_steps) {
  if (!(disc_radius > 0.0) || !(std::abs(start) < disc_radius)) {
    throw ConfigError("sample_bm_until_exit: start must lie inside the disc");
  }
  if (!(dt > 0.0)) {
    throw ConfigError("sample_bm_until_exit: dt must be positive");
  }
  const double sd = std::sqrt(dt);
  Path path{dt, {start}};
  Point x = start;
  double dist = disc_radius - std::abs(x);
  for (std::size_t step = 0; step < max_steps; ++step) {
    const double gx = rng.normal();
    const double gy = rng.normal();
    const Point next = x + sd * Point{gx, gy};
    const double m = std::abs(next);
    if (m >= disc_radius) {
      path.points.push_back(next);
      return path;
    }
    const double next_dist = disc_radius - m;
    if (detail::bridge_crossed(dist, next_dist, dt, rng)) {
      path.points.push_back(detail::project_out(next, disc_radius));
      return path;
    }
    path.points.push_back(next);
    x = next;
    dist = next_dist;
  }
  throw TruncationError("Brownian path exceeded its step budget", std::move(path));
}

Path sample_excursion(const ExcursionConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double theta = 2.0 * kPi * rng.uniform();
  return sample_bm_until_exit(std::polar(1.0 - cfg.eps_start, theta), 1.0, cfg.dt, rng,
                              cfg.max_steps);
}

Path sample_conditioned_loop(const LoopRootConfig& cfg, RngStream& rng) {
  cfg.validate();
  constexpr int kMaxRedraws = 64;
  const double r2 = cfg.r * cfg.r;
  const Point z = cfg.root();
  const double sd = std::sqrt(cfg.dt);
  Point x = z * (1.0 - cfg.eps_offset / cfg.r);
  Path path{cfg.dt, {x}};
  const double stop2 = cfg.stop_radius * cfg.stop_radius;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const Point to_root = x - z;
    const Point drift = -2.0 * x / (r2 - std::norm(x)) - 2.0 * to_root / std::norm(to_root);
    // Tamed step: the drift displacement never exceeds half the gap to the circle.
    Point shift = drift * cfg.dt;
    const double cap = 0.5 * (cfg.r - std::abs(x));
    if (std::abs(shift) > cap) {
      shift *= cap / std::abs(shift);
    }
    const Point mean = x + shift;
    Point next = x;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const double gx = rng.normal();
      const double gy = rng.normal();
      const Point proposal = mean + sd * Point{gx, gy};
      if (std::norm(proposal) < r2) {
        next = proposal;
        break;
      }
    }
    path.points.push_back(next);
    x = next;
    if (std::norm(x - z) <= stop2) {
      return path;
    }
  }
  throw TruncationError("conditioned loop exceeded its step budget", std::move(path));
}

double occupation_time(const Path& path, const Region& A) {
  if (A.is_empty() || path.points.size() < 2) {
    return 0.0;
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    count += A.contains(path.points[i]) ? 1 : 0;
  }
  return path.dt * static_cast<double>(count);
}

double ordered_occupation_product(const Path& path, std::span<const Region> regions) {
  const std::size_t p = regions.size();
  if (p < 2 || p > 5) {
    throw ConfigError("ordered_occupation_product needs between 2 and 5 regions");
  }
  if (std::any_of(regions.begin(), regions.end(), [](const Region& r) { return r.is_empty(); })) {
    return 0.0;
  }
  // prefix[k] = integral over t_1 < ... < t_k <= current time.
  double prefix[6] = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    const Point x = path.points[i];
    for (std::size_t k = p; k >= 1; --k) {
      if (regions[k - 1].contains(x)) {
        prefix[k] += prefix[k - 1] * path.dt;
      }
    }
  }
  return prefix[p];
}

double lens_weight(double d, double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("lens_weight needs eps > 0");
  }
  d = std::abs(d);
  if (d >= 2.0 * eps) {
    return 0.0;
  }
  const double area = 2.0 * eps * eps * std::acos(d / (2.0 * eps)) -
                      0.5 * d * std::sqrt(4.0 * eps * eps - d * d);
  return area / (kPi * kPi * eps * eps * eps * eps);
}

namespace {

std::vector<Point> points_in(const Path& p, const Region& A) {
  std::vector<Point> out;
  for (std::size_t i = 0; i + 1 < p.points.size(); ++i) {
    if (A.contains(p.points[i])) {
      out.push_back(p.points[i]);
    }
  }
  return out;
}

// Total order on paths used to fix which one is hashed.
bool canonical_first(const Path& a, const Path& b) {
  if (a.points.size() != b.points.size()) {
    return a.points.size() < b.points.size();
  }
  if (a.dt != b.dt) {
    return a.dt < b.dt;
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const Point pa = a.points[i];
    const Point pb = b.points[i];
    if (pa.real() != pb.real()) {
      return pa.real() < pb.real();
    }
    if (pa.imag() != pb.imag()) {
      return pa.imag() < pb.imag();
    }
  }
  return true;
}

}  // namespace

double mollified_pair_intersection(const Path& p1, const Path& p2, const Region& A,
                                   double eps_moll) {
  const double dt_max = std::max(p1.dt, p2.dt);
  if (!(eps_moll > std::sqrt(dt_max) && eps_moll < 0.2)) {
    throw ConfigError("eps_moll must lie in (sqrt(dt), 0.2)");
  }
  const bool first = canonical_first(p1, p2);
  const Path& hashed = first ? p1 : p2;
  const Path& probe = first ? p2 : p1;
  const std::vector<Point> hp = points_in(hashed, A);
  const std::vector<Point> qp = points_in(probe, A);
  if (hp.empty() || qp.empty()) {
    return 0.0;
  }
  const double cell = 2.0 * eps_moll;
  auto key_of = [cell](Point p) {
    return std::pair<std::int64_t, std::int64_t>{
        static_cast<std::int64_t>(std::floor(p.real() / cell)),
        static_cast<std::int64_t>(std::floor(p.imag() / cell))};
  };
  std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, std::size_t>> keyed;
  keyed.reserve(hp.size());
  for (std::size_t i = 0; i < hp.size(); ++i) {
    keyed.push_back({key_of(hp[i]), i});
  }
  std::sort(keyed.begin(), keyed.end());
  double total = 0.0;
  for (const Point q : qp) {
    const auto [kx, ky] = key_of(q);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const std::pair<std::int64_t, std::int64_t> k{kx + dx, ky + dy};
        auto lo = std::lower_bound(keyed.begin(), keyed.end(), std::make_pair(k, std::size_t{0}));
        for (auto it = lo; it != keyed.end() && it->first == k; ++it) {
          total += lens_weight(std::abs(hp[it->second] - q), eps_moll);
        }
      }
    }
  }
  return total * hashed.dt * probe.dt;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "path dump assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) {
    throw IoError("truncated path dump");
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_path(std::ostream& out, const Path& path) {
  put<std::uint64_t>(out, path.points.size());
  put<double>(out, path.dt);
  for (const Point& p : path.points) {
    put<double>(out, p.real());
    put<double>(out, p.imag());
  }
  if (!out) {
    throw IoError("could not write path dump");
  }
}

Path read_path(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  Path path;
  path.dt = get<double>(in);
  path.points.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = get<double>(in);
    const double y = get<double>(in);
    path.points.emplace_back(x, y);
  }
  return path;
}

}  // namespace occupation::sampler
