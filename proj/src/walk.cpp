#include "occupation/walk.hpp"

#include <algorithm>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>

#include "bridge.hpp"
#include "occupation/errors.hpp"

namespace occupation::sampler {

namespace {

constexpr int kZeros = 200;
constexpr int kGridPoints = 16384;
constexpr double kGridLo = 0.005;
constexpr double kGridHi = 8.0;

}  // namespace

DiscExitTime::DiscExitTime() {
  zeros_.reserve(kZeros);
  weights_.reserve(kZeros);
  for (int k = 1; k <= kZeros; ++k) {
    const double j = boost::math::cyl_bessel_j_zero(0.0, k);
    zeros_.push_back(j);
    weights_.push_back(2.0 / (j * boost::math::cyl_bessel_j(1, j)));
  }
  grid_t_.resize(kGridPoints);
  grid_log_s_.resize(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    const double t = kGridLo + (kGridHi - kGridLo) * i / (kGridPoints - 1);
    grid_t_[i] = t;
    grid_log_s_[i] = std::log(survival(t));
  }
}

const DiscExitTime& DiscExitTime::instance() {
  static const DiscExitTime table;
  return table;
}

double DiscExitTime::survival(double t) const {
  // Below the grid the exit probability is under e^-90, and the truncated
  // series would lose accuracy.
  if (t <= kGridLo) {
    return 1.0;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < zeros_.size(); ++k) {
    const double e = 0.5 * zeros_[k] * zeros_[k] * t;
    if (e > 745.0) {
      break;
    }
    s += weights_[k] * std::exp(-e);
  }
  return std::clamp(s, 0.0, 1.0);
}

double DiscExitTime::sample(RngStream& rng) const {
  // 1 - uniform lies in (0, 1], so the logarithm is finite.
  const double log_u = std::log(1.0 - rng.uniform());
  if (log_u >= grid_log_s_.front()) {
    return kGridLo;
  }
  if (log_u <= grid_log_s_.back()) {
    const double j1 = zeros_.front();
    return kGridHi + 2.0 * (grid_log_s_.back() - log_u) / (j1 * j1);
  }
  // grid_log_s_ is decreasing; find the cell with log_s[i] >= log_u > log_s[i+1].
  const auto it = std::upper_bound(grid_log_s_.begin(), grid_log_s_.end(), log_u,
                                   [](double v, double s) { return v > s; });
  const std::size_t hi = static_cast<std::size_t>(it - grid_log_s_.begin());
  const std::size_t lo = hi - 1;
  const double w = (grid_log_s_[lo] - log_u) / (grid_log_s_[lo] - grid_log_s_[hi]);
  return grid_t_[lo] + w * (grid_t_[hi] - grid_t_[lo]);
}

WalkSummary walk_until_exit(Point start, std::span<const Region> regions, const WalkOptions& opt,
                            RngStream& rng) {
  if (!(std::abs(start) < 1.0)) {
    throw ConfigError("walk_until_exit: start must lie inside the unit disc");
  }
  if (!(opt.dt > 0.0)) {
    throw ConfigError("walk_until_exit: dt must be positive");
  }
  const std::size_t p = regions.size();
  if (opt.ordered && (p < 2 || p > 5)) {
    throw ConfigError("ordered walk needs between 2 and 5 regions");
  }
  const DiscExitTime& exit_time = DiscExitTime::instance();
  const double sd = std::sqrt(opt.dt);
  const double min_jump = 3.0 * sd;

  WalkSummary out;
  out.start_angle = std::arg(start);
  out.occupation.assign(p, 0.0);
  double prefix[6] = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  bool inside[5] = {false, false, false, false, false};

  Point x = start;
  double lifetime = 0.0;
  std::size_t budget = opt.max_steps;
  while (budget-- > 0) {
    double rho = 1.0 - std::abs(x);
    for (std::size_t k = 0; k < p && opt.jumps && rho >= min_jump; ++k) {
      rho = std::min(rho, regions[k].boundary_distance(x));
    }
    const bool jump = opt.jumps && rho >= min_jump;
    const double dur = jump ? rho * rho * exit_time.sample(rng) : opt.dt;
    for (std::size_t k = 0; k < p; ++k) {
      const bool in = regions[k].contains(x);
      if (in) {
        out.occupation[k] += dur;
      }
      if (k < 5) {
        inside[k] = in;
      }
    }
    if (opt.ordered) {
      if (jump) {
        // prefix[k] += sum_{j<k, A_{j+1..k} active} prefix[j] dur^{k-j} / (k-j)!
        for (std::size_t k = p; k >= 1; --k) {
          double add = 0.0;
          double power = 1.0;
          for (std::size_t j = k; j-- > 0;) {
            if (!inside[j]) {
              break;
            }
            power *= dur / static_cast<double>(k - j);
            add += prefix[j] * power;
          }
          prefix[k] += add;
        }
      } else {
        for (std::size_t k = p; k >= 1; --k) {
          if (inside[k - 1]) {
            prefix[k] += prefix[k - 1] * dur;
          }
        }
      }
    }
    lifetime += dur;
    if (jump) {
      ++out.jumps;
      x += std::polar(rho, 2.0 * kPi * rng.uniform());
      continue;
    }
    ++out.euler_steps;
    const double gx = rng.normal();
    const double gy = rng.normal();
    const Point next = x + sd * Point{gx, gy};
    const double m = std::abs(next);
    if (m >= 1.0 || detail::bridge_crossed(1.0 - std::abs(x), 1.0 - m, opt.dt, rng)) {
      out.lifetime = lifetime;
      out.ordered = opt.ordered ? prefix[p] : 0.0;
      return out;
    }
    x = next;
  }
  out.lifetime = lifetime;
  out.ordered = opt.ordered ? prefix[p] : 0.0;
  out.truncated = true;
  return out;
}

WalkSummary walk_excursion(const ExcursionConfig& cfg, std::span<const Region> regions,
                           bool ordered, RngStream& rng) {
  cfg.validate();
  const double theta = 2.0 * kPi * rng.uniform();
  WalkOptions opt;
  opt.dt = cfg.dt;
  opt.max_steps = cfg.max_steps;
  opt.ordered = ordered;
  return walk_until_exit(std::polar(1.0 - cfg.eps_start, theta), regions, opt, rng);
}

}  // namespace occupation::sampler
