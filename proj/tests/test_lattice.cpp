#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "occupation/errors.hpp"
#include "occupation/kernels.hpp"
#include "occupation/lattice.hpp"

using namespace occupation;
using namespace occupation::lattice;

namespace {

// Random connected-or-not site sets inside a small box.
LatticeModel random_model(std::mt19937_64& gen, int box, double fill) {
  std::bernoulli_distribution keep(fill);
  std::vector<std::pair<int, int>> sites;
  for (int i = 0; i < box; ++i) {
    for (int j = 0; j < box; ++j) {
      if (keep(gen)) {
        sites.emplace_back(i, j);
      }
    }
  }
  if (sites.empty()) {
    sites.emplace_back(0, 0);
  }
  return LatticeModel::from_sites(sites);
}

std::vector<int> random_subset(std::mt19937_64& gen, int n, double p) {
  std::bernoulli_distribution keep(p);
  std::vector<int> out;
  for (int v = 0; v < n; ++v) {
    if (keep(gen)) {
      out.push_back(v);
    }
  }
  if (out.empty()) {
    out.push_back(static_cast<int>(gen() % static_cast<unsigned>(n)));
  }
  return out;
}

// Brute-force sums over A x B of a function of (G(x, y), x == y).
template <class F>
double sum_over(const Eigen::MatrixXd& G, const std::vector<int>& A, const std::vector<int>& B, F f) {
  double s = 0.0;
  for (int x : A) {
    for (int y : B) {
      s += f(G(x, y), x == y ? 1.0 : 0.0, G(x, x));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("single site and two-site Green's functions") {
  const LatticeModel one = LatticeModel::from_sites({{0, 0}});
  CHECK(one.size() == 1);
  CHECK(one.boundary_degree(0) == 4);
  CHECK(discrete_green(one)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

  // P = [[0, 1/4], [1/4, 0]]: G = 16/15 [[1, 1/4], [1/4, 1]].
  const LatticeModel two = LatticeModel::from_sites({{0, 0}, {1, 0}});
  const Eigen::MatrixXd G = discrete_green(two);
  CHECK(G(0, 0) == doctest::Approx(16.0 / 15.0).epsilon(1e-14));
  CHECK(G(0, 1) == doctest::Approx(4.0 / 15.0).epsilon(1e-14));
  CHECK(two.boundary_sites().size() == 6);
}

TEST_CASE("Green's function solves (I - P) G = I and is symmetric") {
  for (double h : {0.25, 0.1, 0.04}) {
    const LatticeModel m = LatticeModel::disc(h);
    const Eigen::MatrixXd G = discrete_green(m);
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m.size(), m.size());
    const Eigen::MatrixXd residual = (I - Eigen::MatrixXd(transition_matrix(m))) * G - I;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(G.minCoeff() >= 0.0);
  }
}

TEST_CASE("dense and sparse factorizations agree") {
  const LatticeModel m = LatticeModel::disc(0.04);
  REQUIRE(m.size() >= 500);
  const DiscreteGreen g(m);
  const Eigen::MatrixXd G = g.dense();
  const LatticeModel small = LatticeModel::disc(0.1);
  REQUIRE(small.size() < 500);
  // Sparse path: pick a column and check the defining equation directly.
  const int y = m.size() / 3;
  const Eigen::VectorXd col = g.column(y);
  const Eigen::VectorXd back = col - transition_matrix(m) * col;
  CHECK(std::abs(back[y] - 1.0) < 1e-10);
  CHECK((back - Eigen::VectorXd::Unit(m.size(), y)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(G(y, 0) == doctest::Approx(g(0, y)).epsilon(1e-12));
}

TEST_CASE("disc model geometry") {
  const LatticeModel m = LatticeModel::disc(0.1);
  for (int v = 0; v < m.size(); ++v) {
    CHECK(std::abs(m.position(v)) < 0.9 + 1e-12);
    const auto& [i, j] = m.site(v);
    CHECK(m.index_of(i, j) == v);
  }
  for (const auto& [i, j] : m.boundary_sites()) {
    CHECK(m.index_of(i, j) == -1);
  }
  const auto comp = m.components();
  CHECK(*std::max_element(comp.begin(), comp.end()) == 0);
  CHECK_THROWS_AS(LatticeModel::disc(0.0), ConfigError);
  CHECK_THROWS_AS(LatticeModel::disc(0.7), ConfigError);
  CHECK_THROWS_AS(LatticeModel::from_sites({}), ConfigError);

  std::ostringstream out;
  LatticeModel::from_sites({{0, 0}, {0, 0}, {2, 0}}).dump(out);
  const std::string text = out.str();
  CHECK(text.find("interior 0 0") != std::string::npos);
  CHECK(text.find("boundary 1 0") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 + 7);
}

TEST_CASE("spectral radius bound is an upper bound and close") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const LatticeModel m = random_model(gen, 7, 0.7);
    const double bound = spectral_radius_bound(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(transition_matrix(m)));
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(bound >= rho);
    CHECK(bound <= rho + 1e-8);
    CHECK(bound < 1.0);
  }
}

TEST_CASE("excursion DP matches 2G - delta on random small models") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 25; ++trial) {
    const LatticeModel m = random_model(gen, 7, 0.6);
    REQUIRE(m.size() <= 50);
    const Eigen::MatrixXd G = discrete_green(m);
    const auto A = random_subset(gen, m.size(), 0.3);
    const auto B = random_subset(gen, m.size(), 0.3);
    const int len = dp_auto_length(m, 1e-11);
    const DpResult dp = dp_excursion_moment(m, A, B, len, 1e-11);
    const double exact = sum_over(G, A, B, [](double g, double d, double) { return 2.0 * g - d; });
    CHECK(std::abs(dp.value - exact) <= 1e-9 * std::max(1.0, exact));
    CHECK(dp.tail_bound <= 1e-11);
  }
}

TEST_CASE("loop DP matches G^2 - delta G(x, x) on random small models") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 15; ++trial) {
    const LatticeModel m = random_model(gen, 6, 0.6);
    const Eigen::MatrixXd G = discrete_green(m);
    const auto A = random_subset(gen, m.size(), 0.3);
    const auto B = random_subset(gen, m.size(), 0.3);
    const int len = dp_auto_length(m, 1e-11);
    const DpResult dp = dp_loop_moment(m, A, B, len, 1e-11);
    const double exact =
        sum_over(G, A, B, [](double g, double d, double gxx) { return g * g - d * gxx; });
    CHECK(std::abs(dp.value - exact) <= 1e-9 * std::max(1.0, exact));
  }
}

TEST_CASE("pair-intersection DP matches sum of (2G - delta)^2") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 8; ++trial) {
    const LatticeModel m = random_model(gen, 5, 0.7);
    const Eigen::MatrixXd G = discrete_green(m);
    const auto A = random_subset(gen, m.size(), 0.3);
    const auto B = random_subset(gen, m.size(), 0.3);
    const int len = dp_auto_length(m, 1e-13);
    const DpResult dp = dp_pair_intersection(m, A, B, len, 1e-9);
    const double exact = sum_over(G, A, B, [](double g, double d, double) {
      return (2.0 * g - d) * (2.0 * g - d);
    });
    CHECK(std::abs(dp.value - exact) <= 1e-9 * std::max(1.0, exact));
  }
}

TEST_CASE("Green sums agree with the dense matrix") {
  const LatticeModel m = LatticeModel::disc(0.1);
  const DiscreteGreen g(m);
  const Eigen::MatrixXd G = g.dense();
  const auto A = m.sites_in(Region::disc({-0.3, 0.0}, 0.25));
  const auto B = m.sites_in(Region::disc({0.3, 0.1}, 0.25));
  CHECK(green_sum(g, A, B) ==
        doctest::Approx(sum_over(G, A, B, [](double x, double, double) { return x; })).epsilon(1e-12));
  CHECK(green_square_sum(g, A, B) ==
        doctest::Approx(sum_over(G, A, B, [](double x, double, double) { return x * x; }))
            .epsilon(1e-12));
}

TEST_CASE("DP moments are additive in each set") {
  std::mt19937_64 gen(21);
  const LatticeModel m = random_model(gen, 7, 0.8);
  const int n = m.size();
  std::vector<int> A1, A2;
  for (int v = 0; v < n; ++v) {
    (v % 2 ? A1 : A2).push_back(v);
  }
  const auto B = random_subset(gen, n, 0.4);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  const int len = dp_auto_length(m, 1e-11);
  const double whole = dp_excursion_moment(m, all, B, len, 1e-11).value;
  const double parts =
      dp_excursion_moment(m, A1, B, len, 1e-11).value + dp_excursion_moment(m, A2, B, len, 1e-11).value;
  CHECK(whole == doctest::Approx(parts).epsilon(1e-10));
  const double lwhole = dp_loop_moment(m, all, B, len, 1e-11).value;
  const double lparts =
      dp_loop_moment(m, A1, B, len, 1e-11).value + dp_loop_moment(m, A2, B, len, 1e-11).value;
  CHECK(lwhole == doctest::Approx(lparts).epsilon(1e-10));
}

TEST_CASE("sets in different components do not interact") {
  const LatticeModel m = LatticeModel::from_sites({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {5, 6}});
  const auto comp = m.components();
  CHECK(*std::max_element(comp.begin(), comp.end()) == 1);
  const std::vector<int> A{m.index_of(0, 0), m.index_of(1, 0)};
  const std::vector<int> B{m.index_of(5, 6)};
  const int len = dp_auto_length(m, 1e-12);
  CHECK(dp_excursion_moment(m, A, B, len).value == 0.0);
  CHECK(dp_loop_moment(m, A, B, len).value == 0.0);
  CHECK(dp_pair_intersection(m, A, B, len).value == 0.0);
  CHECK(discrete_green(m)(A[0], B[0]) == doctest::Approx(0.0));
}

TEST_CASE("tail bound controls truncation") {
  const LatticeModel m = LatticeModel::disc(0.2);
  const std::vector<int> A{0, 1, 2};
  const std::vector<int> B{m.size() - 1};
  for (int len : {20, 40, 80}) {
    const double inf = std::numeric_limits<double>::infinity();
    const DpResult a = dp_excursion_moment(m, A, B, len, inf);
    const DpResult b = dp_excursion_moment(m, A, B, 2 * len, inf);
    CHECK(b.value >= a.value);
    CHECK(b.value - a.value <= a.tail_bound);
    const DpResult la = dp_loop_moment(m, A, A, len, inf);
    const DpResult lb = dp_loop_moment(m, A, A, 2 * len, inf);
    CHECK(lb.value - la.value <= la.tail_bound);
  }
  CHECK_THROWS_AS(dp_excursion_moment(m, A, B, 5, 1e-10), PrecisionError);
  try {
    dp_loop_moment(m, A, B, 5, 1e-10);
    FAIL("expected PrecisionError");
  } catch (const PrecisionError& e) {
    CHECK(e.last() > e.previous());
  }
  CHECK_THROWS_AS(dp_excursion_moment(m, A, B, 0), ConfigError);
  const std::vector<int> bad{m.size()};
  CHECK_THROWS_AS(dp_excursion_moment(m, bad, B, 10), ConfigError);
}

TEST_CASE("calibration constants") {
  const std::vector<double> spacings{0.1, 0.05, 0.025};
  const std::vector<std::pair<Point, Point>> pairs{
      {{-0.3, 0.0}, {0.3, 0.0}}, {{0.0, 0.2}, {0.0, -0.4}}, {{0.2, 0.2}, {-0.4, -0.1}}};
  const Calibration cal = calibrate_constants(spacings, pairs);
  CHECK(cal.c_T == 0.5);
  CHECK(cal.c_G == doctest::Approx(2.0).epsilon(0.02));
  CHECK(cal.monotone);
  CHECK(cal.residuals.size() == 3);
  CHECK(std::abs(cal.c_G - 2.0) <= cal.c_G_error);
  const std::vector<double> too_few{0.1, 0.05};
  CHECK_THROWS_AS(calibrate_constants(too_few, pairs), ConfigError);
}

TEST_CASE("discrete Gaussian field has the requested covariance") {
  const LatticeModel m = LatticeModel::disc(0.2);
  const double c_G = 2.0;
  const GffSampler gff(m, c_G);
  const Eigen::MatrixXd target = discrete_green(m) / (2.0 * c_G);
  CHECK((gff.covariance() - target).cwiseAbs().maxCoeff() < 1e-12);
  RngStream rng(77, 0);
  const int n = 40000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m.size(), m.size());
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = gff.sample(rng);
    acc += x * x.transpose();
  }
  acc /= n;
  // Diagonal entries: relative standard error sqrt(2 / n) ~ 0.7%.
  for (int v = 0; v < m.size(); ++v) {
    CHECK(acc(v, v) == doctest::Approx(target(v, v)).epsilon(0.03));
  }
  CHECK_THROWS_AS(GffSampler(m, 0.0), ConfigError);
}

TEST_CASE("discrete Dirichlet problem") {
  const LatticeModel m = LatticeModel::disc(0.05);
  const Eigen::VectorXd ones = dirichlet_solve(m, [](Point) { return 1.0; });
  CHECK((ones.array() - 1.0).abs().maxCoeff() < 1e-10);

  const Eigen::VectorXd u = dirichlet_solve(m, [](Point p) { return std::cos(3.0 * std::arg(p)); });
  CHECK(u.maxCoeff() <= 1.0);
  CHECK(u.minCoeff() >= -1.0);

  // Linear data is discrete harmonic, so the solution reproduces it exactly.
  const Eigen::VectorXd lin = dirichlet_solve(m, [](Point p) { return p.real(); });
  double err = 0.0;
  for (int v = 0; v < m.size(); ++v) {
    err = std::max(err, std::abs(lin[v] - m.position(v).real()));
  }
  CHECK(err < 1e-10);

  // Data given as a function of angle only: O(h) error against the continuum harmonic extension.
  const Eigen::VectorXd ang = dirichlet_solve(m, [](Point p) { return std::cos(std::arg(p)); });
  double err2 = 0.0;
  for (int v = 0; v < m.size(); ++v) {
    err2 = std::max(err2, std::abs(ang[v] - m.position(v).real()));
  }
  CHECK(err2 < 3.0 * m.spacing());
  CHECK_THROWS_AS(dirichlet_solve(m, [](Point) { return std::nan(""); }), ConfigError);
}
