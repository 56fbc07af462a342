#include "occupation/clouds.hpp"

#include <algorithm>
#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/kurtosis.hpp>
#include <boost/accumulators/statistics/mean.hpp>
#include <boost/accumulators/statistics/moment.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/variance.hpp>
#include <cmath>
#include <sstream>

#include "occupation/errors.hpp"
#include "occupation/lattice.hpp"
#include "occupation/parallel.hpp"
#include "occupation/walk.hpp"

namespace occupation::clouds {

namespace {

const analytic::QuadratureSpec kQuad{8, 6, 1e-6};

void require_intensity(double c) {
  if (!(c >= 0.0 && std::isfinite(c))) {
    throw ConfigError("cloud intensity must be finite and non-negative");
  }
}

void require_mass(double mass) {
  if (mass > kMaxCloudMass) {
    throw ConfigError("cloud budget exceeded: mean path count above 1e7");
  }
}

void require_inside(const TestFunction& f) {
  for (const auto& [region, w] : f.terms) {
    if (w != 0.0 && !region.is_empty() && !region.inside_disc(1.0)) {
      throw DomainError("test function support must lie inside the unit disc");
    }
  }
}

}  // namespace

double excursion_cloud_mass(double c, double eps) { return c * 2.0 * kPi / eps; }

Cloud sample_excursion_cloud(double c, const sampler::ExcursionConfig& cfg, RngStream& rng) {
  cfg.validate();
  require_intensity(c);
  const double mass = excursion_cloud_mass(c, cfg.eps_start);
  require_mass(mass);
  Cloud cloud;
  cloud.intensity = c;
  cloud.eps_used = cfg.eps_start;
  const std::uint64_t n = c == 0.0 ? 0 : rng.poisson(mass);
  cloud.paths.reserve(n);
  cloud.signs.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    cloud.paths.push_back(sampler::sample_excursion(cfg, rng));
    cloud.signs.push_back(rng.uniform() < 0.5 ? -1 : 1);
  }
  return cloud;
}

double excursion_occupation_mean(const TestFunction& f, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw ConfigError("eps must lie in (0, 1)");
  }
  require_inside(f);
  const double s = 1.0 - eps;
  double total = 0.0;
  for (const auto& [region, w] : f.terms) {
    if (w == 0.0 || region.is_empty()) {
      continue;
    }
    if (region.max_modulus() <= s) {
      total += w * region.area() * -std::log(s);
    } else {
      total += w * analytic::integrate_over(
                       region, [s](Point y) { return -std::log(std::max(s, std::abs(y))); }, 24, 4);
    }
  }
  return 2.0 * total / eps;
}

double path_integral(const sampler::Path& p, const TestFunction& f) {
  double total = 0.0;
  for (const auto& [region, w] : f.terms) {
    if (w != 0.0) {
      total += w * sampler::occupation_time(p, region);
    }
  }
  return total;
}

CloudStatistics cloud_statistics(const Cloud& cloud, const TestFunction& f) {
  CloudStatistics s;
  if (f.is_zero()) {
    return s;
  }
  for (std::size_t k = 0; k < cloud.paths.size(); ++k) {
    const double v = path_integral(cloud.paths[k], f);
    s.X += v;
    s.Y += cloud.signs[k] * v;
  }
  const double mean =
      cloud.intensity == 0.0 ? 0.0 : cloud.intensity * excursion_occupation_mean(f, cloud.eps_used);
  s.X_centered = s.X - mean;
  return s;
}

ExcursionCloudSampler::ExcursionCloudSampler(std::vector<TestFunction> family, double c,
                                             sampler::ExcursionConfig cfg, bool restrict_to_support)
    : family_(std::move(family)), cfg_(cfg), c_(c) {
  cfg_.validate();
  require_intensity(c);
  require_mass(excursion_cloud_mass(c, cfg_.eps_start));
  double R = 0.0;
  for (const TestFunction& f : family_) {
    require_inside(f);
    std::vector<std::pair<std::size_t, double>> w;
    for (const auto& [region, weight] : f.terms) {
      if (weight == 0.0 || region.is_empty()) {
        continue;
      }
      auto it = std::find(regions_.begin(), regions_.end(), region);
      if (it == regions_.end()) {
        regions_.push_back(region);
        it = regions_.end() - 1;
      }
      w.emplace_back(static_cast<std::size_t>(it - regions_.begin()), weight);
      R = std::max(R, region.max_modulus());
    }
    weights_.push_back(std::move(w));
    centering_.push_back(c * excursion_occupation_mean(f, cfg_.eps_start));
  }
  const double s = 1.0 - cfg_.eps_start;
  const double full = excursion_cloud_mass(c, cfg_.eps_start);
  if (regions_.empty()) {
    mass_ = 0.0;
    radius_ = 0.0;
  } else if (restrict_to_support && R < s) {
    restricted_ = true;
    radius_ = R;
    // Probability that planar Brownian motion from |x| = s reaches |x| = R before |x| = 1.
    mass_ = full * std::log(s) / std::log(R);
  } else {
    mass_ = full;
    radius_ = 1.0;
  }
}

void ExcursionCloudSampler::sample(RngStream& rng, std::span<double> X, std::span<double> Y) const {
  if (X.size() != family_.size() || Y.size() != family_.size()) {
    throw ConfigError("output spans must match the family size");
  }
  std::fill(X.begin(), X.end(), 0.0);
  std::fill(Y.begin(), Y.end(), 0.0);
  if (mass_ == 0.0 || c_ == 0.0) {
    return;
  }
  const std::uint64_t n = rng.poisson(mass_);
  sampler::WalkOptions wo;
  wo.dt = cfg_.dt;
  wo.max_steps = cfg_.max_steps;
  for (std::uint64_t k = 0; k < n; ++k) {
    sampler::WalkSummary w;
    if (restricted_) {
      const Point start = std::polar(radius_, 2.0 * kPi * rng.uniform());
      w = sampler::walk_until_exit(start, regions_, wo, rng);
    } else {
      w = sampler::walk_excursion(cfg_, regions_, false, rng);
    }
    if (w.truncated) {
      throw EstimationError("cloud excursion exceeded the step budget");
    }
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < family_.size(); ++i) {
      double v = 0.0;
      for (const auto& [idx, weight] : weights_[i]) {
        v += weight * w.occupation[idx];
      }
      X[i] += v;
      Y[i] += sign * v;
    }
  }
}

CltTable clt_family(std::span<const TestFunction> family, int N, double c, std::size_t n_replicas,
                    const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt) {
  if (N < 1 || n_replicas < 2) {
    throw ConfigError("clt needs N >= 1 and at least two replicas");
  }
  if (opt.tasks < 1) {
    throw ConfigError("tasks must be positive");
  }
  if (family.empty()) {
    throw ConfigError("clt needs at least one test function");
  }
  const ExcursionCloudSampler sampler({family.begin(), family.end()}, c, cfg);
  const std::size_t m = family.size();
  const std::size_t T = std::min(opt.tasks, n_replicas);
  const double norm = 1.0 / std::sqrt(static_cast<double>(N));
  auto parts = run_tasks(T, opt.workers, [&](std::size_t t) {
    const auto [lo, hi] = task_range(n_replicas, T, t);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hi - lo), static_cast<Eigen::Index>(m));
    Eigen::MatrixXd x = y;
    RngStream rng(opt.seed, opt.stream_base + t);
    std::vector<double> X(m), Y(m);
    for (std::size_t r = lo; r < hi; ++r) {
      const auto row = static_cast<Eigen::Index>(r - lo);
      for (int j = 0; j < N; ++j) {
        sampler.sample(rng, X, Y);
        for (std::size_t i = 0; i < m; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          y(row, col) += Y[i];
          x(row, col) += X[i] - sampler.centering(i);
        }
      }
    }
    return std::pair{std::move(y), std::move(x)};
  });
  CltTable table;
  table.n_clouds = N;
  table.y.resize(static_cast<Eigen::Index>(n_replicas), static_cast<Eigen::Index>(m));
  table.x_centered.resizeLike(table.y);
  Eigen::Index row = 0;
  for (const auto& [y, x] : parts) {
    table.y.middleRows(row, y.rows()) = y * norm;
    table.x_centered.middleRows(row, x.rows()) = x * norm;
    row += y.rows();
  }
  return table;
}

std::string describe(const TestFunction& f) {
  if (f.terms.empty()) {
    return "0";
  }
  std::ostringstream out;
  out.precision(6);
  for (std::size_t k = 0; k < f.terms.size(); ++k) {
    if (k > 0) {
      out << '+';
    }
    out << f.terms[k].second << '*' << f.terms[k].first.describe();
  }
  return out.str();
}

CltSamples clt_fluctuation(int N, double c, const TestFunction& f, std::size_t n_replicas,
                           const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt) {
  if (N < 16 || n_replicas < 1000) {
    throw ConfigError("clt_fluctuation needs N >= 16 and at least 1000 replicas");
  }
  const TestFunction family[1] = {f};
  const CltTable table = clt_family(family, N, c, n_replicas, cfg, opt);
  const std::string id = describe(f);
  CltSamples out;
  out.y.reserve(n_replicas);
  out.x_centered.reserve(n_replicas);
  for (Eigen::Index r = 0; r < table.y.rows(); ++r) {
    out.y.push_back({table.y(r, 0), N, id});
    out.x_centered.push_back({table.x_centered(r, 0), N, id});
  }
  return out;
}

ReplicaSummary summarize(std::span<const double> values) {
  namespace ba = boost::accumulators;
  ba::accumulator_set<double, ba::stats<ba::tag::mean, ba::tag::variance, ba::tag::kurtosis>> acc;
  for (double v : values) {
    acc(v);
  }
  ReplicaSummary s;
  s.n = values.size();
  if (s.n < 2) {
    throw ConfigError("summarize needs at least two values");
  }
  const double n = static_cast<double>(s.n);
  s.mean = ba::mean(acc);
  // Boost reports the biased variance; rescale to the unbiased one.
  s.variance = ba::variance(acc) * n / (n - 1.0);
  s.mean_se = std::sqrt(s.variance / n);
  s.excess_kurtosis = s.variance > 0.0 ? ba::kurtosis(acc) : 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    m4 += d * d * d * d;
  }
  m4 /= n;
  const double m2 = ba::variance(acc);
  s.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return s;
}

ReplicaSummary summarize(std::span<const FluctuationSample> samples) {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) {
    v.push_back(s.value);
  }
  return summarize(v);
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& rows) {
  const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

Eigen::MatrixXd covariance_se(const Eigen::MatrixXd& rows) {
  const Eigen::MatrixXd c = rows.rowwise() - rows.colwise().mean();
  const Eigen::Index m = rows.cols();
  const double n = static_cast<double>(rows.rows());
  Eigen::MatrixXd se(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::ArrayXd prod = c.col(i).array() * c.col(j).array();
      const double mean = prod.mean();
      se(i, j) = std::sqrt((prod - mean).square().sum() / (n - 1.0) / n);
    }
  }
  return se;
}

}  // namespace

GffReport gff_compare(std::span<const TestFunction> family, int N, std::size_t n_replicas,
                      const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt,
                      const GffLatticeOptions& lat, double c) {
  const std::size_t m = family.size();
  if (m == 0 || m > 8) {
    throw ConfigError("gff_compare takes between 1 and 8 test functions");
  }
  const CltTable table = clt_family(family, N, c, n_replicas, cfg, opt);
  GffReport rep;
  rep.n_replicas = n_replicas;
  rep.n_clouds = N;
  rep.empirical = covariance(table.y);
  rep.empirical_centered = covariance(table.x_centered);
  rep.standard_error = covariance_se(table.y);
  rep.standard_error_centered = covariance_se(table.x_centered);
  const auto M = static_cast<Eigen::Index>(m);
  rep.target = Eigen::MatrixXd::Zero(M, M);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = family[i].is_zero() || family[j].is_zero()
                           ? 0.0
                           : 8.0 * c * analytic::gff_covariance(family[i], family[j], kQuad).value;
      rep.target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      rep.target(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }

  rep.c_G = lat.c_G;
  if (rep.c_G <= 0.0) {
    const double spacings[3] = {0.1, 0.05, 0.025};
    const std::pair<Point, Point> pairs[3] = {
        {{-0.3, 0.0}, {0.3, 0.0}}, {{0.0, 0.2}, {0.0, -0.4}}, {{0.2, 0.2}, {-0.4, -0.1}}};
    rep.c_G = lattice::calibrate_constants(spacings, pairs).c_G;
  }
  const lattice::LatticeModel model = lattice::LatticeModel::disc(lat.h);
  const lattice::GffSampler gff(model, rep.c_G);
  const double h2 = lat.h * lat.h;
  // Integral of f_i over each lattice cell, by a 16 x 16 midpoint rule.
  constexpr int kSub = 16;
  Eigen::MatrixXd F(model.size(), M);
  for (int v = 0; v < model.size(); ++v) {
    const Point p = model.position(v);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int a = 0; a < kSub; ++a) {
        for (int b = 0; b < kSub; ++b) {
          acc += family[i](p + lat.h * Point{(a + 0.5) / kSub - 0.5, (b + 0.5) / kSub - 0.5});
        }
      }
      F(v, static_cast<Eigen::Index>(i)) = acc / (kSub * kSub) * h2;
    }
  }
  rep.lattice_exact = 8.0 * c * F.transpose() * gff.covariance() * F;
  if (lat.draws >= 2) {
    RngStream rng(opt.seed, opt.stream_base + opt.tasks);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(lat.draws), M);
    for (std::size_t d = 0; d < lat.draws; ++d) {
      rows.row(static_cast<Eigen::Index>(d)) = (F.transpose() * gff.sample(rng)).transpose();
    }
    rep.lattice_empirical = 8.0 * c * covariance(rows);
  }
  return rep;
}

LoopSoupResult loop_soup_signed(double c, const estimators::LoopSpec& spec, const Region& S,
                                const TestFunction& f, int N, std::size_t n_replicas,
                                const estimators::RunOptions& opt, int buckets,
                                std::size_t pilot_replicas) {
  spec.validate();
  require_intensity(c);
  if (N < 1 || n_replicas < 1 || buckets < 1 || opt.tasks < 1) {
    throw ConfigError("loop soup needs N, n_replicas, buckets and tasks positive");
  }
  if (S.is_empty() || !S.inside_disc(0.95)) {
    throw ConfigError("loop soup support must stay at distance 0.05 from the boundary");
  }
  for (const auto& [region, w] : f.terms) {
    if (w != 0.0 && !region.is_empty()) {
      const BoundingBox a = region.bounding_box();
      const BoundingBox b = S.bounding_box();
      if (a.lo.real() < b.lo.real() || a.lo.imag() < b.lo.imag() || a.hi.real() > b.hi.real() ||
          a.hi.imag() > b.hi.imag()) {
        throw ConfigError("test function must be supported in S");
      }
    }
  }
  LoopSoupResult out;
  out.r_min = std::max(spec.r_min, S.min_modulus());
  if (!(out.r_min > 0.0)) {
    throw ConfigError("loop soup needs r_min > 0 when S reaches the origin");
  }
  const double eps = spec.eps;
  out.loops_per_cloud = c * (2.0 - eps) / (eps * eps) * std::log(1.0 / out.r_min);
  require_mass(out.loops_per_cloud);
  const std::string id = describe(f);
  out.bucket_means.assign(static_cast<std::size_t>(buckets), 0.0);
  if (f.is_zero() || c == 0.0) {
    out.y.assign(n_replicas, {0.0, N, id});
    out.x_centered = out.y;
    out.target = 0.0;
    return out;
  }
  out.target = c * analytic::quad_green_power(f, f, 2, kQuad).value;

  struct CloudDraw {
    double Y = 0.0;
    std::vector<double> X;
    std::size_t kept = 0, rejected = 0, truncated = 0;
  };
  const double log_r_min = std::log(out.r_min);
  auto draw_cloud = [&](RngStream& rng) {
    CloudDraw d;
    d.X.assign(static_cast<std::size_t>(buckets), 0.0);
    const std::uint64_t n = rng.poisson(out.loops_per_cloud);
    for (std::uint64_t k = 0; k < n; ++k) {
      const double r = std::exp(log_r_min * rng.uniform());
      const sampler::LoopRootConfig lc = spec.root_config(r, 2.0 * kPi * rng.uniform());
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      sampler::Path loop;
      try {
        loop = sampler::sample_conditioned_loop(lc, rng);
      } catch (const sampler::TruncationError&) {
        ++d.truncated;
        continue;
      }
      const double v = path_integral(loop, f);
      if (v == 0.0) {
        ++d.rejected;
        continue;
      }
      ++d.kept;
      const double tau = loop.lifetime();
      const int k1 = tau > 1.0 ? 1 : std::min(buckets, static_cast<int>(std::floor(1.0 / tau)) + 1);
      d.X[static_cast<std::size_t>(k1 - 1)] += v;
      d.Y += sign * v;
    }
    return d;
  };

  // Pilot clouds for the bucket means.
  if (pilot_replicas > 0) {
    const std::size_t T = std::min(opt.tasks, pilot_replicas);
    auto pilots = run_tasks(T, opt.workers, [&](std::size_t t) {
      const auto [lo, hi] = task_range(pilot_replicas, T, t);
      RngStream rng(opt.seed, opt.stream_base + opt.tasks + t);
      std::vector<double> sums(static_cast<std::size_t>(buckets), 0.0);
      for (std::size_t r = lo; r < hi; ++r) {
        const CloudDraw d = draw_cloud(rng);
        for (std::size_t k = 0; k < sums.size(); ++k) {
          sums[k] += d.X[k];
        }
      }
      return sums;
    });
    for (const auto& s : pilots) {
      for (std::size_t k = 0; k < s.size(); ++k) {
        out.bucket_means[k] += s[k] / static_cast<double>(pilot_replicas);
      }
    }
  }

  struct Part {
    std::vector<double> y, x;
    std::size_t kept = 0, rejected = 0, truncated = 0;
  };
  const std::size_t T = std::min(opt.tasks, n_replicas);
  const double norm = 1.0 / std::sqrt(static_cast<double>(N));
  auto parts = run_tasks(T, opt.workers, [&](std::size_t t) {
    const auto [lo, hi] = task_range(n_replicas, T, t);
    RngStream rng(opt.seed, opt.stream_base + t);
    Part p;
    for (std::size_t r = lo; r < hi; ++r) {
      double y = 0.0, x = 0.0;
      for (int j = 0; j < N; ++j) {
        const CloudDraw d = draw_cloud(rng);
        y += d.Y;
        for (std::size_t k = 0; k < d.X.size(); ++k) {
          x += d.X[k] - out.bucket_means[k];
        }
        p.kept += d.kept;
        p.rejected += d.rejected;
        p.truncated += d.truncated;
      }
      p.y.push_back(y * norm);
      p.x.push_back(x * norm);
    }
    return p;
  });
  for (const Part& p : parts) {
    for (std::size_t r = 0; r < p.y.size(); ++r) {
      out.y.push_back({p.y[r], N, id});
      out.x_centered.push_back({p.x[r], N, id});
    }
    out.kept += p.kept;
    out.rejected += p.rejected;
    out.truncated += p.truncated;
  }
  return out;
}

}  // namespace occupation::clouds
