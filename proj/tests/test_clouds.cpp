#include <cmath>
#include <vector>

#include "doctest.h"
#include "occupation/clouds.hpp"
#include "occupation/errors.hpp"
#include "occupation/quadrature.hpp"

using namespace occupation;
using namespace occupation::clouds;
using analytic::Density;

namespace {

sampler::ExcursionConfig coarse(double eps = 0.1, double dt = 1e-4) {
  sampler::ExcursionConfig cfg;
  cfg.eps_start = eps;
  cfg.dt = dt;
  return cfg;
}

estimators::RunOptions options(std::uint64_t seed, std::uint64_t base = 0) {
  estimators::RunOptions o;
  o.seed = seed;
  o.stream_base = base;
  o.tasks = 16;
  return o;
}

const analytic::QuadratureSpec kQuad{8, 6, 1e-6};

// Two-sample z statistic for a difference of means.
double z_means(const ReplicaSummary& a, const ReplicaSummary& b) {
  return (a.mean - b.mean) / std::hypot(a.mean_se, b.mean_se);
}

double z_variances(const ReplicaSummary& a, const ReplicaSummary& b) {
  return (a.variance - b.variance) / std::hypot(a.variance_se, b.variance_se);
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    v[static_cast<std::size_t>(r)] = m(r, c);
  }
  return v;
}

}  // namespace

TEST_CASE("empty clouds and budget guard") {
  RngStream rng(1, 0);
  const Cloud empty = sample_excursion_cloud(0.0, coarse(), rng);
  CHECK(empty.paths.empty());
  CHECK(empty.signs.empty());
  const CloudStatistics s = cloud_statistics(empty, Density::indicator(Region::disc({0, 0}, 0.3)));
  CHECK(s.X == 0.0);
  CHECK(s.Y == 0.0);
  CHECK(s.X_centered == 0.0);
  CHECK_THROWS_AS(sample_excursion_cloud(-1.0, coarse(), rng), ConfigError);
  CHECK_THROWS_AS(sample_excursion_cloud(1e6, coarse(), rng), ConfigError);
  CHECK(excursion_cloud_mass(1.0, 0.02) == doctest::Approx(2.0 * kPi / 0.02));
}

TEST_CASE("cloud size is Poisson with mean c 2 pi / eps") {
  RngStream rng(2, 0);
  const double c = 0.5;
  const auto cfg = coarse(0.1, 2.5e-3);
  const int n = 1000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const Cloud cl = sample_excursion_cloud(c, cfg, rng);
    REQUIRE(cl.signs.size() == cl.paths.size());
    sum += static_cast<double>(cl.paths.size());
    sum2 += static_cast<double>(cl.paths.size() * cl.paths.size());
    for (int s : cl.signs) {
      REQUIRE((s == 1 || s == -1));
    }
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double expected = excursion_cloud_mass(c, cfg.eps_start);
  CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(expected / n));
  // Poisson dispersion: variance equals the mean.
  CHECK(var == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("exact finite-eps occupation mean") {
  const Region A = Region::disc({0.2, -0.1}, 0.3);
  const double eps = 0.05;
  const double inside = excursion_occupation_mean(Density::indicator(A), eps);
  CHECK(inside == doctest::Approx(2.0 * A.area() * -std::log(1.0 - eps) / eps).epsilon(1e-12));
  // A region poking into the outer eps-annulus picks up log(1/|y|) there instead.
  const Region B = Region::disc({0.0, 0.8}, 0.18);
  const double mixed = excursion_occupation_mean(Density::indicator(B), eps);
  const double direct = 2.0 / eps *
                        analytic::integrate_over(
                            B, [eps](Point y) { return -std::log(std::max(1.0 - eps, std::abs(y))); },
                            40, 8);
  CHECK(mixed == doctest::Approx(direct).epsilon(1e-5));
  CHECK(mixed < 2.0 * B.area() * -std::log(1.0 - eps) / eps);
  CHECK(excursion_occupation_mean(Density{}, eps) == 0.0);
  CHECK_THROWS_AS(excursion_occupation_mean(Density::indicator(Region::disc({0.9, 0}, 0.2)), eps),
                  DomainError);
}

TEST_CASE("mean cumulative occupation of path clouds") {
  const Region A = Region::disc({0.0, 0.0}, 0.4);
  const Density f = Density::indicator(A);
  const auto cfg = coarse(0.1, 1e-4);
  RngStream rng(3, 0);
  std::vector<double> X, Xc;
  for (int k = 0; k < 1000; ++k) {
    const CloudStatistics s = cloud_statistics(sample_excursion_cloud(0.2, cfg, rng), f);
    X.push_back(s.X);
    Xc.push_back(s.X_centered);
  }
  const ReplicaSummary sx = summarize(X);
  const double target = 0.2 * excursion_occupation_mean(f, cfg.eps_start);
  CHECK(std::abs(sx.mean - target) <= 3.0 * sx.mean_se);
  CHECK(std::abs(summarize(Xc).mean) <= 3.0 * sx.mean_se);
}

TEST_CASE("superposition of independent clouds") {
  const Density f = Density::indicator(Region::disc({0.1, 0.1}, 0.35));
  const auto cfg = coarse(0.1, 1e-4);
  RngStream r1(4, 0), r2(4, 1);
  std::vector<double> n_split, n_one, x_split, x_one;
  for (int k = 0; k < 600; ++k) {
    const Cloud a = sample_excursion_cloud(0.15, cfg, r1);
    const Cloud b = sample_excursion_cloud(0.25, cfg, r1);
    const Cloud c = sample_excursion_cloud(0.40, cfg, r2);
    n_split.push_back(static_cast<double>(a.paths.size() + b.paths.size()));
    n_one.push_back(static_cast<double>(c.paths.size()));
    x_split.push_back(cloud_statistics(a, f).X + cloud_statistics(b, f).X);
    x_one.push_back(cloud_statistics(c, f).X);
  }
  CHECK(std::abs(z_means(summarize(n_split), summarize(n_one))) < 4.0);
  CHECK(std::abs(z_means(summarize(x_split), summarize(x_one))) < 4.0);
  CHECK(std::abs(z_variances(summarize(x_split), summarize(x_one))) < 4.0);
}

TEST_CASE("restricting to excursions that reach the support preserves the law") {
  const std::vector<Density> fam{Density::indicator(Region::disc({-0.2, 0.0}, 0.2)),
                                 Density::indicator(Region::disc({0.25, 0.1}, 0.15))};
  const auto cfg = coarse(0.05, 1e-4);
  const ExcursionCloudSampler fast(fam, 1.0, cfg, true);
  const ExcursionCloudSampler full(fam, 1.0, cfg, false);
  const double R = std::abs(Point{0.25, 0.1}) + 0.15;
  CHECK(fast.support_radius() == doctest::Approx(R));
  CHECK(fast.simulated_mass() ==
        doctest::Approx(excursion_cloud_mass(1.0, 0.05) * std::log(0.95) / std::log(R)));
  CHECK(full.simulated_mass() == doctest::Approx(excursion_cloud_mass(1.0, 0.05)));
  RngStream ra(5, 0), rb(5, 1);
  std::vector<double> xa, xb, ya, yb;
  std::vector<double> X(2), Y(2);
  for (int k = 0; k < 4000; ++k) {
    fast.sample(ra, X, Y);
    xa.push_back(X[0] + X[1]);
    ya.push_back(Y[0]);
    full.sample(rb, X, Y);
    xb.push_back(X[0] + X[1]);
    yb.push_back(Y[0]);
  }
  CHECK(std::abs(z_means(summarize(xa), summarize(xb))) < 4.0);
  CHECK(std::abs(z_variances(summarize(ya), summarize(yb))) < 4.0);
  const double target = fast.centering(0) + fast.centering(1);
  CHECK(std::abs(summarize(xa).mean - target) < 4.0 * summarize(xa).mean_se);
}

TEST_CASE("single-cloud variance of Y is 4 int int G f f") {
  const Density f = Density::indicator(Region::disc({0.0, 0.0}, 0.15));
  const std::vector<Density> fam{f};
  const auto cfg = coarse(0.02, 1e-4);
  const CltTable t = clt_family(fam, 1, 1.0, 40000, cfg, options(6));
  const ReplicaSummary y = summarize(column(t.y, 0));
  const ReplicaSummary x = summarize(column(t.x_centered, 0));
  const double sigma2 = 8.0 * analytic::gff_covariance(f, f, kQuad).value;
  CHECK(sigma2 == doctest::Approx(4.0 * analytic::quad_green_power(f, f, 1, kQuad).value));
  CHECK(y.variance == doctest::Approx(sigma2).epsilon(0.05));
  CHECK(x.variance == doctest::Approx(sigma2).epsilon(0.05));
  CHECK(std::abs(z_variances(y, x)) < 4.0);
  // Signs are fair: the signed sum is symmetric about zero.
  CHECK(std::abs(y.mean) <= 4.0 * y.mean_se);
}

TEST_CASE("negating all signs mirrors Y and leaves |Y| unchanged") {
  RngStream rng(7, 0);
  const Density f = Density::indicator(Region::disc({0.0, 0.3}, 0.3));
  for (int k = 0; k < 20; ++k) {
    Cloud c = sample_excursion_cloud(0.3, coarse(), rng);
    const CloudStatistics a = cloud_statistics(c, f);
    for (int& s : c.signs) {
      s = -s;
    }
    const CloudStatistics b = cloud_statistics(c, f);
    CHECK(b.Y == -a.Y);
    CHECK(std::abs(b.Y) == std::abs(a.Y));
    CHECK(b.X == a.X);
  }
}

TEST_CASE("CLT replicas are centered with the right variance") {
  const Density f = Density::indicator(Region::disc({0.2, 0.0}, 0.2));
  const auto cfg = coarse(0.02, 1e-4);
  const CltSamples s = clt_fluctuation(16, 1.0, f, 2000, cfg, options(8));
  REQUIRE(s.y.size() == 2000);
  CHECK(s.y.front().n_clouds == 16);
  CHECK(s.y.front().f_descriptor == describe(f));
  const ReplicaSummary y = summarize(s.y);
  const ReplicaSummary x = summarize(s.x_centered);
  const double sigma2 = 8.0 * analytic::gff_covariance(f, f, kQuad).value;
  CHECK(std::abs(y.mean) <= 3.0 * y.mean_se);
  CHECK(std::abs(x.mean) <= 3.0 * x.mean_se);
  // Sampling error plus a 2% allowance for the finite-eps bias.
  CHECK(std::abs(y.variance - sigma2) <= 4.0 * y.variance_se + 0.02 * sigma2);
  CHECK(std::abs(x.variance - sigma2) <= 4.0 * x.variance_se + 0.02 * sigma2);
  CHECK_THROWS_AS(clt_fluctuation(8, 1.0, f, 2000, cfg, options(8)), ConfigError);
  CHECK_THROWS_AS(clt_fluctuation(16, 1.0, f, 100, cfg, options(8)), ConfigError);
}

TEST_CASE("CLT replicas do not depend on the worker count") {
  const std::vector<Density> fam{Density::indicator(Region::disc({0.0, 0.0}, 0.2))};
  auto a = options(9);
  auto b = options(9);
  b.workers = 3;
  const CltTable ta = clt_family(fam, 4, 1.0, 50, coarse(0.05, 1e-4), a);
  const CltTable tb = clt_family(fam, 4, 1.0, 50, coarse(0.05, 1e-4), b);
  CHECK(ta.y == tb.y);
  CHECK(ta.x_centered == tb.x_centered);
}

TEST_CASE("replica summary") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const ReplicaSummary s = summarize(v);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  // Uniform four-point set: m4 / m2^2 - 3 = 2.5625 / 1.5625 - 3.
  CHECK(s.excess_kurtosis == doctest::Approx(2.5625 / 1.5625 - 3.0));
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(summarize(one), ConfigError);
}

TEST_CASE("GFF comparison report") {
  const std::vector<Density> fam{Density::indicator(Region::disc({-0.2, 0.0}, 0.2)),
                                 Density::indicator(Region::disc({0.2, 0.0}, 0.2)), Density{},
                                 Density::indicator(Region::disc({0.0, -0.7}, 0.1))};
  GffLatticeOptions lat;
  lat.h = 0.05;
  lat.draws = 4000;
  const GffReport r = gff_compare(fam, 2, 2000, coarse(0.02, 1e-4), options(10), lat);
  for (int k = 0; k < 4; ++k) {
    CHECK(r.empirical(2, k) == 0.0);
    CHECK(r.target(2, k) == 0.0);
    CHECK(r.lattice_exact(2, k) == 0.0);
  }
  CHECK(r.c_G == doctest::Approx(2.0).epsilon(0.01));
  for (int i : {0, 1, 3}) {
    for (int j : {0, 1, 3}) {
      CHECK(r.target(i, j) > 0.0);
      CHECK(std::abs(r.empirical(i, j) - r.target(i, j)) <=
            4.0 * r.standard_error(i, j) + 0.02 * r.target(i, j));
      // Cell-averaged test functions: first order in h, under 3% at h = 0.05.
      CHECK(r.lattice_exact(i, j) == doctest::Approx(r.target(i, j)).epsilon(0.05));
    }
    // 4000 draws: about 2% standard error on the diagonal.
    CHECK(r.lattice_empirical(i, i) == doctest::Approx(r.lattice_exact(i, i)).epsilon(0.1));
  }
  // Far-apart supports: small but positive covariance.
  CHECK(r.target(0, 3) < 0.2 * r.target(0, 0));
  CHECK_THROWS_AS(gff_compare(std::vector<Density>(9, fam[0]), 4, 100, coarse(), options(10)),
                  ConfigError);
}

TEST_CASE("loop soup with zero test function") {
  estimators::LoopSpec spec;
  const LoopSoupResult r =
      loop_soup_signed(1.0, spec, Region::disc({0.5, 0.0}, 0.2), Density{}, 2, 10, options(11));
  REQUIRE(r.y.size() == 10);
  for (std::size_t k = 0; k < r.y.size(); ++k) {
    CHECK(r.y[k].value == 0.0);
    CHECK(r.x_centered[k].value == 0.0);
  }
  CHECK_THROWS_AS(loop_soup_signed(1.0, spec, Region::disc({0.0, 0.0}, 0.3),
                                   Density::indicator(Region::disc({0.0, 0.0}, 0.2)), 1, 10,
                                   options(11)),
                  ConfigError);
  CHECK_THROWS_AS(loop_soup_signed(1.0, spec, Region::disc({0.5, 0.0}, 0.2),
                                   Density::indicator(Region::disc({0.0, 0.5}, 0.1)), 1, 10,
                                   options(11)),
                  ConfigError);
  CHECK_THROWS_AS(loop_soup_signed(1.0, spec, Region::disc({0.8, 0.0}, 0.18), Density{}, 1, 10,
                                   options(11)),
                  ConfigError);
}

TEST_CASE("loop soup variance approaches int int G^2 f f") {
  estimators::LoopSpec spec;
  spec.eps = 0.05;
  spec.dt_scale = 6.9e-5;
  const Region S = Region::disc({0.45, 0.0}, 0.25);
  const Density f = Density::indicator(Region::disc({0.45, 0.0}, 0.2));
  const LoopSoupResult r = loop_soup_signed(1.0, spec, S, f, 1, 2000, options(12), 8, 200);
  CHECK(r.r_min == doctest::Approx(0.2));
  CHECK(r.loops_per_cloud == doctest::Approx((2.0 - 0.05) / 0.0025 * std::log(5.0)));
  CHECK(r.truncated == 0);
  CHECK(r.kept > 0);
  CHECK(r.rejected > r.kept);
  const ReplicaSummary y = summarize(r.y);
  const ReplicaSummary x = summarize(r.x_centered);
  CHECK(r.target == doctest::Approx(analytic::quad_green_power(f, f, 2, kQuad).value));
  CHECK(y.variance == doctest::Approx(r.target).epsilon(0.2));
  CHECK(std::abs(x.mean) <= 4.0 * x.mean_se);
  CHECK(std::abs(z_variances(y, x)) < 4.0);
}
