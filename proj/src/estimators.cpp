#include "occupation/estimators.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "occupation/errors.hpp"
#include "occupation/kernels.hpp"
#include "occupation/parallel.hpp"

namespace occupation::estimators {

namespace {

constexpr std::size_t kMinSamples = 1000;

void require_samples(std::size_t n, const char* who) {
  if (n < kMinSamples) {
    throw ConfigError(std::string(who) + ": needs at least 1000 samples");
  }
}

void require_tasks(const RunOptions& opt) {
  if (opt.tasks == 0) {
    throw ConfigError("RunOptions.tasks must be positive");
  }
}

sampler::WalkSummary summarize(const sampler::Path& p, std::span<const Region> regions,
                               bool ordered) {
  sampler::WalkSummary s;
  s.lifetime = p.lifetime();
  s.start_angle = std::arg(p.points.front());
  s.euler_steps = p.steps();
  s.occupation.reserve(regions.size());
  for (const Region& r : regions) {
    s.occupation.push_back(sampler::occupation_time(p, r));
  }
  if (ordered) {
    s.ordered = sampler::ordered_occupation_product(p, regions);
  }
  return s;
}

struct Part {
  Accumulator acc;
  std::size_t truncated = 0;
};

Estimate finish(const std::vector<Part>& parts, double scale, const char* who) {
  Accumulator acc;
  std::size_t truncated = 0;
  for (const Part& p : parts) {
    acc.merge(p.acc);
    truncated += p.truncated;
  }
  if (acc.count() == 0) {
    throw EstimationError(std::string(who) + ": every sample was truncated");
  }
  Estimate e = Estimate::from(acc, scale);
  e.n_truncated = truncated;
  return e;
}

bool outside_disc(const Region& r) { return !r.is_empty() && r.min_modulus() >= 1.0; }

}  // namespace

double excursion_weight(double eps) { return 2.0 * kPi / eps; }

Estimate mc_excursion_expectation(const PathFunctional& F, const sampler::ExcursionConfig& cfg,
                                  std::size_t n, const RunOptions& opt) {
  cfg.validate();
  require_samples(n, "mc_excursion_expectation");
  require_tasks(opt);
  auto parts = run_tasks(opt.tasks, opt.workers, [&](std::size_t t) {
    Part part;
    RngStream rng(opt.seed, opt.stream_base + t);
    const auto [lo, hi] = task_range(n, opt.tasks, t);
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        part.acc.add(F(sampler::sample_excursion(cfg, rng)));
      } catch (const sampler::TruncationError&) {
        ++part.truncated;
      }
    }
    return part;
  });
  return finish(parts, excursion_weight(cfg.eps_start), "mc_excursion_expectation");
}

Estimate mc_excursion_summary(const SummaryFunctional& F, std::span<const Region> regions,
                              bool ordered, const sampler::ExcursionConfig& cfg, std::size_t n,
                              const RunOptions& opt) {
  cfg.validate();
  require_samples(n, "mc_excursion_summary");
  require_tasks(opt);
  auto parts = run_tasks(opt.tasks, opt.workers, [&](std::size_t t) {
    Part part;
    RngStream rng(opt.seed, opt.stream_base + t);
    const auto [lo, hi] = task_range(n, opt.tasks, t);
    for (std::size_t i = lo; i < hi; ++i) {
      if (opt.engine == Engine::walk) {
        const sampler::WalkSummary s = sampler::walk_excursion(cfg, regions, ordered, rng);
        if (s.truncated) {
          ++part.truncated;
        } else {
          part.acc.add(F(s));
        }
        continue;
      }
      try {
        part.acc.add(F(summarize(sampler::sample_excursion(cfg, rng), regions, ordered)));
      } catch (const sampler::TruncationError&) {
        ++part.truncated;
      }
    }
    return part;
  });
  return finish(parts, excursion_weight(cfg.eps_start), "mc_excursion_summary");
}

Estimate tau_mass(const sampler::ExcursionConfig& cfg, std::size_t n, const RunOptions& opt) {
  Estimate e = mc_excursion_summary([](const sampler::WalkSummary& s) { return s.lifetime; }, {},
                                    false, cfg, n, opt);
  e.set_target(2.0 * kPi);
  return e;
}

Estimate excursion_covariance(const Region& A, const Region& B, const sampler::ExcursionConfig& cfg,
                              std::size_t n, const RunOptions& opt,
                              const analytic::QuadratureSpec& quad) {
  if (!A.is_empty() && !B.is_empty() && A.gap_to(B) < 1e-3) {
    throw ConfigError("excursion_covariance: regions must be at distance >= 1e-3");
  }
  const std::vector<Region> regions{A, B};
  Estimate e = mc_excursion_summary(
      [](const sampler::WalkSummary& s) { return s.occupation[0] * s.occupation[1]; }, regions,
      false, cfg, n, opt);
  if (outside_disc(A) || outside_disc(B)) {
    e.set_target(0.0);
  } else {
    e.set_target(4.0 * analytic::quad_green_power(A, B, 1, quad).value);
  }
  return e;
}

Estimate dirichlet_weighted_occupation(const std::function<double(double)>& f, const Region& A,
                                       const sampler::ExcursionConfig& cfg, std::size_t n,
                                       const RunOptions& opt) {
  const std::vector<Region> regions{A};
  Estimate e = mc_excursion_summary(
      [&f](const sampler::WalkSummary& s) {
        return s.occupation[0] == 0.0 ? 0.0 : f(s.start_angle) * s.occupation[0];
      },
      regions, false, cfg, n, opt);
  constexpr int kNodes = 1024;
  std::vector<double> values(kNodes);
  for (int k = 0; k < kNodes; ++k) {
    values[k] = f(2.0 * kPi * k / kNodes);
  }
  double target = 0.0;
  if (!A.is_empty()) {
    if (!A.inside_disc(1.0)) {
      throw DomainError("dirichlet_weighted_occupation: A must lie inside the disc");
    }
    target = 2.0 * analytic::integrate_over(
                       A, [&values](Point y) { return analytic::harmonic_extension(values, y); },
                       24, 3);
  }
  e.set_target(target);
  return e;
}

Estimate higher_moment_ordered(std::span<const Region> regions, const sampler::ExcursionConfig& cfg,
                               std::size_t n, const RunOptions& opt,
                               const analytic::QuadratureSpec& quad) {
  if (regions.size() != 2 && regions.size() != 3) {
    throw ConfigError("higher_moment_ordered supports p = 2 or 3");
  }
  bool any_empty = false;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    any_empty = any_empty || regions[i].is_empty();
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      if (!regions[i].is_empty() && !regions[j].is_empty() && regions[i].gap_to(regions[j]) <= 0.0) {
        throw ConfigError("higher_moment_ordered: regions must be pairwise disjoint");
      }
    }
  }
  Estimate e = mc_excursion_summary([](const sampler::WalkSummary& s) { return s.ordered; },
                                    regions, true, cfg, n, opt);
  e.set_target(any_empty ? 0.0 : 2.0 * analytic::quad_green_chain(regions, quad).value);
  return e;
}

void LoopSpec::validate() const {
  if (!(eps > 0.0 && eps < 0.1)) {
    throw ConfigError("loop eps must lie in (0, 0.1)");
  }
  if (!(dt_scale > 0.0 && dt_scale <= eps * eps / 36.0)) {
    throw ConfigError("loop dt_scale must lie in (0, eps^2 / 36]");
  }
  if (!(stop_ratio > 0.0 && stop_ratio <= 1.0)) {
    throw ConfigError("loop stop_ratio must lie in (0, 1]");
  }
  if (!(r_min >= 0.0 && r_min < 1.0)) {
    throw ConfigError("loop r_min must lie in [0, 1)");
  }
  if (strata < 1 || max_steps < 1) {
    throw ConfigError("loop strata and max_steps must be positive");
  }
}

sampler::LoopRootConfig LoopSpec::root_config(double r, double theta) const {
  sampler::LoopRootConfig lc;
  lc.r = r;
  lc.theta = theta;
  lc.eps_offset = eps * r;
  lc.dt = dt_scale * r * r;
  lc.stop_radius = std::max(stop_ratio * eps, 3.0 * std::sqrt(dt_scale)) * r;
  lc.max_steps = max_steps;
  return lc;
}

Estimate mc_loop_expectation(const PathFunctional& F, const LoopSpec& spec, std::size_t n,
                             const RunOptions& opt) {
  spec.validate();
  require_samples(n, "mc_loop_expectation");
  require_tasks(opt);
  const std::size_t S = static_cast<std::size_t>(spec.strata);
  const std::size_t per = std::max<std::size_t>(1, opt.tasks / S);
  const double u0 = spec.r_min * spec.r_min;
  const double mass = kPi * (1.0 - u0);
  auto parts = run_tasks(S * per, opt.workers, [&](std::size_t t) {
    const std::size_t k = t / per;
    const std::size_t n_k = n / S + (k < n % S ? 1 : 0);
    const auto [lo, hi] = task_range(n_k, per, t % per);
    const double u_lo = u0 + (1.0 - u0) * static_cast<double>(k) / static_cast<double>(S);
    const double u_hi = u0 + (1.0 - u0) * static_cast<double>(k + 1) / static_cast<double>(S);
    Part part;
    RngStream rng(opt.seed, opt.stream_base + t);
    for (std::size_t i = lo; i < hi; ++i) {
      const double r = std::sqrt(u_lo + (u_hi - u_lo) * rng.uniform());
      const sampler::LoopRootConfig lc = spec.root_config(r, 2.0 * kPi * rng.uniform());
      try {
        const sampler::Path loop = sampler::sample_conditioned_loop(lc, rng);
        const double w =
            mass * analytic::poisson_kernel_disc(loop.points.front(), lc.root(), r) / lc.eps_offset;
        part.acc.add(w * F(loop));
      } catch (const sampler::TruncationError&) {
        ++part.truncated;
      }
    }
    return part;
  });
  double mean = 0.0;
  double var = 0.0;
  Estimate e;
  for (std::size_t k = 0; k < S; ++k) {
    Accumulator acc;
    for (std::size_t j = 0; j < per; ++j) {
      acc.merge(parts[k * per + j].acc);
      e.n_truncated += parts[k * per + j].truncated;
    }
    if (acc.count() == 0) {
      throw EstimationError("mc_loop_expectation: a stratum has no completed loops");
    }
    mean += acc.mean() / static_cast<double>(S);
    var += acc.variance() / static_cast<double>(acc.count()) / static_cast<double>(S * S);
    e.n_samples += acc.count();
    e.n_nonzero += acc.nonzero();
  }
  Estimate out = Estimate::make(mean, std::sqrt(var), e.n_samples);
  out.n_truncated = e.n_truncated;
  out.n_nonzero = e.n_nonzero;
  return out;
}

Estimate loop_covariance(const Region& A, const Region& B, LoopSpec spec, std::size_t n,
                         const RunOptions& opt, const analytic::QuadratureSpec& quad) {
  if (A.is_empty() || B.is_empty() || outside_disc(A) || outside_disc(B)) {
    Estimate e = Estimate::make(0.0, 0.0, n);
    e.set_target(0.0);
    return e;
  }
  spec.r_min = std::max({spec.r_min, A.min_modulus(), B.min_modulus()});
  Estimate e = mc_loop_expectation(
      [&A, &B](const sampler::Path& p) {
        const double a = sampler::occupation_time(p, A);
        return a == 0.0 ? 0.0 : a * sampler::occupation_time(p, B);
      },
      spec, n, opt);
  e.set_target(analytic::quad_green_power(A, B, 2, quad).value);
  return e;
}

Estimate pair_intersection_covariance(const Region& A, const Region& B,
                                      const sampler::ExcursionConfig& cfg, std::size_t n_pairs,
                                      double eps_moll, const RunOptions& opt,
                                      const analytic::QuadratureSpec& quad) {
  cfg.validate();
  require_samples(n_pairs, "pair_intersection_covariance");
  require_tasks(opt);
  if (!(eps_moll > std::sqrt(cfg.dt) && eps_moll < 0.2)) {
    throw ConfigError("eps_moll must lie in (sqrt(dt), 0.2)");
  }
  if (!A.is_empty() && !B.is_empty() && A.gap_to(B) <= 0.0) {
    throw ConfigError("pair_intersection_covariance: regions must be disjoint");
  }
  auto parts = run_tasks(opt.tasks, opt.workers, [&](std::size_t t) {
    Part part;
    RngStream rng(opt.seed, opt.stream_base + t);
    const auto [lo, hi] = task_range(n_pairs, opt.tasks, t);
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        const sampler::Path p1 = sampler::sample_excursion(cfg, rng);
        const sampler::Path p2 = sampler::sample_excursion(cfg, rng);
        const double ta = sampler::mollified_pair_intersection(p1, p2, A, eps_moll);
        part.acc.add(ta == 0.0 ? 0.0
                               : ta * sampler::mollified_pair_intersection(p1, p2, B, eps_moll));
      } catch (const sampler::TruncationError&) {
        ++part.truncated;
      }
    }
    return part;
  });
  const double w = excursion_weight(cfg.eps_start);
  Estimate e = finish(parts, w * w, "pair_intersection_covariance");
  const bool trivial = A.is_empty() || B.is_empty() || outside_disc(A) || outside_disc(B);
  e.set_target(trivial ? 0.0 : 16.0 * analytic::quad_green_power(A, B, 2, quad).value);
  return e;
}

namespace {

// Grid points shift + h (i, j) lying in a region, with a compact index.
class RegionGrid {
 public:
  RegionGrid(const Region& region, Point shift, double h) : region_(region), shift_(shift), h_(h) {
    const BoundingBox box = region.bounding_box();
    i0_ = static_cast<long>(std::ceil((box.lo.real() - shift.real()) / h));
    j0_ = static_cast<long>(std::ceil((box.lo.imag() - shift.imag()) / h));
    ni_ = static_cast<long>(std::floor((box.hi.real() - shift.real()) / h)) - i0_ + 1;
    nj_ = static_cast<long>(std::floor((box.hi.imag() - shift.imag()) / h)) - j0_ + 1;
    ni_ = std::max(ni_, 0L);
    nj_ = std::max(nj_, 0L);
    index_.assign(static_cast<std::size_t>(ni_ * nj_), -1);
    for (long i = 0; i < ni_; ++i) {
      for (long j = 0; j < nj_; ++j) {
        if (region.contains(point(i, j))) {
          index_[static_cast<std::size_t>(i * nj_ + j)] = size_++;
        }
      }
    }
    lo_ = box.lo;
    hi_ = box.hi;
  }

  int size() const noexcept { return size_; }

  // Adds weight to every grid point y with |y - x| < eps.
  void deposit(Point x, double eps, double weight, std::vector<std::pair<int, double>>& out) const {
    if (x.real() < lo_.real() - eps || x.real() > hi_.real() + eps || x.imag() < lo_.imag() - eps ||
        x.imag() > hi_.imag() + eps) {
      return;
    }
    const long ia = std::max(0L, static_cast<long>(std::ceil((x.real() - eps - shift_.real()) / h_)) - i0_);
    const long ib = std::min(ni_ - 1, static_cast<long>(std::floor((x.real() + eps - shift_.real()) / h_)) - i0_);
    const long ja = std::max(0L, static_cast<long>(std::ceil((x.imag() - eps - shift_.imag()) / h_)) - j0_);
    const long jb = std::min(nj_ - 1, static_cast<long>(std::floor((x.imag() + eps - shift_.imag()) / h_)) - j0_);
    const double eps2 = eps * eps;
    for (long i = ia; i <= ib; ++i) {
      for (long j = ja; j <= jb; ++j) {
        const int idx = index_[static_cast<std::size_t>(i * nj_ + j)];
        if (idx >= 0 && std::norm(point(i, j) - x) < eps2) {
          out.emplace_back(idx, weight);
        }
      }
    }
  }

 private:
  Point point(long i, long j) const {
    return shift_ + h_ * Point{static_cast<double>(i + i0_), static_cast<double>(j + j0_)};
  }

  Region region_;
  Point shift_;
  double h_;
  long i0_ = 0, j0_ = 0, ni_ = 0, nj_ = 0;
  std::vector<int> index_;
  int size_ = 0;
  Point lo_, hi_;
};

using SparseVec = std::vector<std::pair<int, double>>;

SparseVec compact(SparseVec v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec out;
  for (const auto& [i, w] : v) {
    if (!out.empty() && out.back().first == i) {
      out.back().second += w;
    } else {
      out.emplace_back(i, w);
    }
  }
  return out;
}

Eigen::MatrixXd gram(const std::vector<SparseVec>& rows, int cols) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> L(static_cast<Eigen::Index>(rows.size()), cols);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& [i, w] : rows[k]) {
      trip.emplace_back(static_cast<int>(k), i, w);
    }
  }
  L.setFromTriplets(trip.begin(), trip.end());
  const Eigen::SparseMatrix<double> G = L * Eigen::SparseMatrix<double, Eigen::RowMajor>(L.transpose());
  return Eigen::MatrixXd(G);
}

}  // namespace

Estimate pair_intersection_pooled(const Region& A, const Region& B,
                                  const sampler::ExcursionConfig& cfg, std::size_t pool,
                                  double eps_moll, const RunOptions& opt, double grid_factor,
                                  const analytic::QuadratureSpec& quad) {
  cfg.validate();
  require_samples(pool, "pair_intersection_pooled");
  require_tasks(opt);
  if (!(eps_moll > std::sqrt(cfg.dt) && eps_moll < 0.2)) {
    throw ConfigError("eps_moll must lie in (sqrt(dt), 0.2)");
  }
  if (!(grid_factor > 0.0 && grid_factor <= 1.0)) {
    throw ConfigError("grid_factor must lie in (0, 1]");
  }
  if (A.is_empty() || B.is_empty() || outside_disc(A) || outside_disc(B)) {
    Estimate e = Estimate::make(0.0, 0.0, pool);
    e.set_target(0.0);
    return e;
  }
  if (A.gap_to(B) <= 0.0) {
    throw ConfigError("pair_intersection_pooled: regions must be disjoint");
  }
  const double h = grid_factor * eps_moll;
  // The grid shift uses the stream just past the sampling tasks.
  RngStream shift_rng(opt.seed, opt.stream_base + opt.tasks);
  const Point shift{h * shift_rng.uniform(), h * shift_rng.uniform()};
  const RegionGrid grid_a(A, shift, h);
  const RegionGrid grid_b(B, shift, h);
  const double cell = h * h;
  const double delta_norm = 1.0 / (kPi * eps_moll * eps_moll);

  struct Kept {
    std::vector<SparseVec> a, b;
  };
  auto parts = run_tasks(opt.tasks, opt.workers, [&](std::size_t t) {
    Kept kept;
    RngStream rng(opt.seed, opt.stream_base + t);
    const auto [lo, hi] = task_range(pool, opt.tasks, t);
    SparseVec la, lb;
    for (std::size_t i = lo; i < hi; ++i) {
      const sampler::Path p = sampler::sample_excursion(cfg, rng);
      la.clear();
      lb.clear();
      const double w = p.dt * delta_norm;
      for (std::size_t s = 0; s + 1 < p.points.size(); ++s) {
        grid_a.deposit(p.points[s], eps_moll, w, la);
        grid_b.deposit(p.points[s], eps_moll, w, lb);
      }
      if (!la.empty() && !lb.empty()) {
        kept.a.push_back(compact(la));
        kept.b.push_back(compact(lb));
      }
    }
    return kept;
  });
  std::vector<SparseVec> rows_a, rows_b;
  for (auto& k : parts) {
    std::move(k.a.begin(), k.a.end(), std::back_inserter(rows_a));
    std::move(k.b.begin(), k.b.end(), std::back_inserter(rows_b));
  }
  const double n = static_cast<double>(pool);
  const double w = excursion_weight(cfg.eps_start);
  double sum = 0.0, sum2 = 0.0, sum_h1_sq = 0.0;
  std::size_t nonzero = 0;
  if (!rows_a.empty()) {
    const Eigen::MatrixXd ga = gram(rows_a, grid_a.size());
    const Eigen::MatrixXd gb = gram(rows_b, grid_b.size());
    Eigen::MatrixXd H = (w * w * cell * cell) * ga.cwiseProduct(gb);
    H.diagonal().setZero();
    sum = H.sum();
    sum2 = H.squaredNorm();
    const Eigen::VectorXd h1 = H.rowwise().sum() / (n - 1.0);
    sum_h1_sq = h1.squaredNorm();
    nonzero = static_cast<std::size_t>((H.array() > 0.0).count()) / 2;
  }
  const double U = sum / (n * (n - 1.0));
  const double sigma1 = std::max(0.0, sum_h1_sq / n - U * U);
  const double sigma2 = std::max(0.0, sum2 / (n * (n - 1.0)) - U * U);
  const double var = (4.0 * (n - 2.0) * sigma1 + 2.0 * sigma2) / (n * (n - 1.0));
  Estimate e = Estimate::make(U, std::sqrt(var), pool);
  e.n_nonzero = nonzero;
  e.set_target(16.0 * analytic::quad_green_power(A, B, 2, quad).value);
  return e;
}

}  // namespace occupation::estimators
