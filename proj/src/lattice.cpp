#include "occupation/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "occupation/errors.hpp"
#include "occupation/kernels.hpp"

namespace occupation::lattice {

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};
constexpr int kMaxGreenSites = 20000;
constexpr int kDenseThreshold = 500;

}  // namespace

LatticeModel LatticeModel::disc(double h) {
  if (!(h > 0.0 && h <= 0.5)) {
    throw ConfigError("lattice spacing must lie in (0, 0.5]");
  }
  const int n = static_cast<int>(std::floor(1.0 / h));
  std::vector<std::pair<int, int>> sites;
  for (int i = -n; i <= n; ++i) {
    for (int j = -n; j <= n; ++j) {
      if (std::hypot(i * h, j * h) < 1.0 - h) {
        sites.emplace_back(i, j);
      }
    }
  }
  return from_sites(std::move(sites), h);
}

LatticeModel LatticeModel::from_sites(std::vector<std::pair<int, int>> sites, double h) {
  if (!(h > 0.0)) {
    throw ConfigError("lattice spacing must be positive");
  }
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  if (sites.empty()) {
    throw ConfigError("lattice model needs at least one interior site");
  }
  LatticeModel m;
  m.h_ = h;
  m.sites_ = std::move(sites);
  int i_max = m.sites_.front().first, j_max = m.sites_.front().second;
  m.i_min_ = i_max;
  m.j_min_ = j_max;
  for (const auto& [i, j] : m.sites_) {
    m.i_min_ = std::min(m.i_min_, i);
    m.j_min_ = std::min(m.j_min_, j);
    i_max = std::max(i_max, i);
    j_max = std::max(j_max, j);
  }
  m.width_ = i_max - m.i_min_ + 1;
  m.height_ = j_max - m.j_min_ + 1;
  m.lookup_.assign(static_cast<std::size_t>(m.width_) * static_cast<std::size_t>(m.height_), -1);
  for (int v = 0; v < m.size(); ++v) {
    const auto& [i, j] = m.sites_[static_cast<std::size_t>(v)];
    m.lookup_[static_cast<std::size_t>((i - m.i_min_) * m.height_ + (j - m.j_min_))] = v;
  }
  m.nbr_.resize(m.sites_.size());
  for (int v = 0; v < m.size(); ++v) {
    const auto& [i, j] = m.sites_[static_cast<std::size_t>(v)];
    for (int k = 0; k < 4; ++k) {
      m.nbr_[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] = m.index_of(i + kDx[k], j + kDy[k]);
    }
  }
  return m;
}

Point LatticeModel::position(int v) const {
  const auto& [i, j] = site(v);
  return Point{h_ * i, h_ * j};
}

int LatticeModel::index_of(int i, int j) const {
  const int a = i - i_min_;
  const int b = j - j_min_;
  if (a < 0 || b < 0 || a >= width_ || b >= height_) {
    return -1;
  }
  return lookup_[static_cast<std::size_t>(a * height_ + b)];
}

int LatticeModel::boundary_degree(int v) const {
  const auto& nb = neighbours(v);
  return static_cast<int>(std::count(nb.begin(), nb.end(), -1));
}

std::vector<std::pair<int, int>> LatticeModel::boundary_sites() const {
  std::set<std::pair<int, int>> out;
  for (int v = 0; v < size(); ++v) {
    const auto& [i, j] = site(v);
    for (int k = 0; k < 4; ++k) {
      if (neighbours(v)[static_cast<std::size_t>(k)] < 0) {
        out.emplace(i + kDx[k], j + kDy[k]);
      }
    }
  }
  return {out.begin(), out.end()};
}

std::vector<int> LatticeModel::sites_in(const Region& r) const {
  std::vector<int> out;
  for (int v = 0; v < size(); ++v) {
    if (r.contains(position(v))) {
      out.push_back(v);
    }
  }
  return out;
}

std::vector<int> LatticeModel::components() const {
  std::vector<int> label(sites_.size(), -1);
  int next = 0;
  for (int s = 0; s < size(); ++s) {
    if (label[static_cast<std::size_t>(s)] >= 0) {
      continue;
    }
    std::deque<int> queue{s};
    label[static_cast<std::size_t>(s)] = next;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : neighbours(v)) {
        if (w >= 0 && label[static_cast<std::size_t>(w)] < 0) {
          label[static_cast<std::size_t>(w)] = next;
          queue.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

void LatticeModel::dump(std::ostream& out) const {
  out.precision(17);
  out << "spacing " << h_ << '\n';
  for (const auto& [i, j] : sites_) {
    out << "interior " << i << ' ' << j << '\n';
  }
  for (const auto& [i, j] : boundary_sites()) {
    out << "boundary " << i << ' ' << j << '\n';
  }
  if (!out) {
    throw IoError("could not write lattice dump");
  }
}

Eigen::SparseMatrix<double> transition_matrix(const LatticeModel& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (int v = 0; v < m.size(); ++v) {
    for (int w : m.neighbours(v)) {
      if (w >= 0) {
        trip.emplace_back(v, w, 0.25);
      }
    }
  }
  Eigen::SparseMatrix<double> P(m.size(), m.size());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

Eigen::VectorXd entry_vector(const LatticeModel& m) {
  Eigen::VectorXd e(m.size());
  for (int v = 0; v < m.size(); ++v) {
    e[v] = 0.25 * m.boundary_degree(v);
  }
  return e;
}

double spectral_radius_bound(const LatticeModel& m) {
  // For positive v, rho((I + P) / 2) <= max_i ((v + P v) / 2)_i / v_i.
  const Eigen::SparseMatrix<double> P = transition_matrix(m);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.size());
  double best = 1.0;
  double previous = 2.0;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd w = 0.5 * (v + P * v);
    const double bound = (w.array() / v.array()).maxCoeff();
    best = std::min(best, bound);
    v = w / w.maxCoeff();
    if (it % 64 == 0) {
      if (std::abs(previous - best) < 1e-15) {
        break;
      }
      previous = best;
    }
  }
  return std::min(1.0, 2.0 * best - 1.0 + 1e-12);
}

struct DiscreteGreen::Impl {
  Eigen::LDLT<Eigen::MatrixXd> dense;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> sparse;
  bool use_dense = true;
};

DiscreteGreen::DiscreteGreen(const LatticeModel& m) : n_(m.size()), impl_(std::make_unique<Impl>()) {
  if (n_ > kMaxGreenSites) {
    throw ConfigError("discrete Green's function supports at most 2e4 interior sites");
  }
  Eigen::SparseMatrix<double> M(n_, n_);
  M.setIdentity();
  M -= transition_matrix(m);
  impl_->use_dense = n_ < kDenseThreshold;
  if (impl_->use_dense) {
    impl_->dense.compute(Eigen::MatrixXd(M));
    if (impl_->dense.info() != Eigen::Success || !impl_->dense.isPositive()) {
      throw ModelError("dense factorization of I - P failed");
    }
  } else {
    impl_->sparse.compute(M);
    if (impl_->sparse.info() != Eigen::Success) {
      throw ModelError("sparse factorization of I - P failed");
    }
  }
}

DiscreteGreen::~DiscreteGreen() = default;
DiscreteGreen::DiscreteGreen(DiscreteGreen&&) noexcept = default;
DiscreteGreen& DiscreteGreen::operator=(DiscreteGreen&&) noexcept = default;

Eigen::VectorXd DiscreteGreen::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = impl_->use_dense ? Eigen::VectorXd(impl_->dense.solve(rhs))
                                       : Eigen::VectorXd(impl_->sparse.solve(rhs));
  if (!x.allFinite()) {
    throw ModelError("discrete Green solve produced non-finite values");
  }
  return x;
}

Eigen::VectorXd DiscreteGreen::column(int y) const {
  if (y < 0 || y >= n_) {
    throw ConfigError("site index out of range");
  }
  return solve(Eigen::VectorXd::Unit(n_, y));
}

double DiscreteGreen::operator()(int x, int y) const {
  if (x < 0 || x >= n_) {
    throw ConfigError("site index out of range");
  }
  return column(y)[x];
}

Eigen::MatrixXd DiscreteGreen::dense() const {
  if (n_ > 5000) {
    throw ConfigError("dense Green matrix limited to 5000 sites");
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n_, n_);
  Eigen::MatrixXd G = impl_->use_dense ? Eigen::MatrixXd(impl_->dense.solve(I))
                                       : Eigen::MatrixXd(impl_->sparse.solve(I));
  return G;
}

Eigen::MatrixXd discrete_green(const LatticeModel& m) { return DiscreteGreen(m).dense(); }

namespace {

Eigen::VectorXd mask(const LatticeModel& m, std::span<const int> sites) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.size());
  for (int v : sites) {
    if (v < 0 || v >= m.size()) {
      throw ConfigError("site index out of range");
    }
    out[v] = 1.0;
  }
  return out;
}

// sum_{m >= M} m^2 x^m
double tail_m2(double x, double M) {
  if (x <= 0.0) {
    return 0.0;
  }
  const double q = 1.0 - x;
  return std::pow(x, M) * (M * M / q + 2.0 * M * x / (q * q) + x * (1.0 + x) / (q * q * q));
}

// sum_{m >= M} m x^m
double tail_m1(double x, double M) {
  if (x <= 0.0) {
    return 0.0;
  }
  const double q = 1.0 - x;
  return std::pow(x, M) * (M / q + x / (q * q));
}

// Bound on sum_{n > N} over excursion lengths n of (n + 1)^2 c |e|^2 rho^n.
double excursion_tail(double rho, double e2, int N, bool disjoint) {
  const double c = disjoint ? 0.25 : 1.0;
  return c * e2 * tail_m2(rho, N + 2.0) / rho;
}

// Bound on sum_{n > N} of (1 / n) n^2 c |V| rho^n.
double loop_tail(double rho, int V, int N, bool disjoint) {
  const double c = disjoint ? 0.25 : 1.0;
  return c * V * tail_m1(rho, N + 1.0);
}

bool disjoint_sets(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.cwiseProduct(b).sum() == 0.0;
}

void check_len(int max_len) {
  if (max_len < 1) {
    throw ConfigError("max_len must be positive");
  }
}

}  // namespace

DpResult dp_excursion_moment(const LatticeModel& m, std::span<const int> A, std::span<const int> B,
                             int max_len, double tol) {
  check_len(max_len);
  const Eigen::VectorXd ma = mask(m, A);
  const Eigen::VectorXd mb = mask(m, B);
  const Eigen::VectorXd mab = ma.cwiseProduct(mb);
  const Eigen::SparseMatrix<double> P = transition_matrix(m);
  const Eigen::VectorXd e = entry_vector(m);
  Eigen::VectorXd a = e;
  Eigen::VectorXd alpha = e.cwiseProduct(ma);
  Eigen::VectorXd beta = e.cwiseProduct(mb);
  Eigen::VectorXd gamma = e.cwiseProduct(mab);
  double value = gamma.dot(e);
  for (int n = 1; n <= max_len; ++n) {
    const Eigen::VectorXd pa = P * a;
    const Eigen::VectorXd palpha = P * alpha;
    const Eigen::VectorXd pbeta = P * beta;
    gamma = P * gamma + mb.cwiseProduct(palpha) + ma.cwiseProduct(pbeta) + mab.cwiseProduct(pa);
    alpha = palpha + ma.cwiseProduct(pa);
    beta = pbeta + mb.cwiseProduct(pa);
    a = pa;
    value += gamma.dot(e);
  }
  DpResult r;
  r.value = value;
  r.steps = max_len;
  r.tail_bound = excursion_tail(spectral_radius_bound(m), e.squaredNorm(), max_len,
                                disjoint_sets(ma, mb));
  if (r.tail_bound > tol) {
    throw PrecisionError("excursion DP tail bound above tolerance", value, value + r.tail_bound);
  }
  return r;
}

DpResult dp_loop_moment(const LatticeModel& m, std::span<const int> A, std::span<const int> B,
                        int max_len, double tol) {
  check_len(max_len);
  const Eigen::VectorXd ma = mask(m, A);
  const Eigen::VectorXd mb = mask(m, B);
  const Eigen::VectorXd mab = ma.cwiseProduct(mb);
  const Eigen::SparseMatrix<double> P = transition_matrix(m);
  const int V = m.size();
  // Column r tracks loops rooted at r.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(V, V);
  Eigen::MatrixXd alpha = ma.asDiagonal() * a;
  Eigen::MatrixXd beta = mb.asDiagonal() * a;
  Eigen::MatrixXd gamma = mab.asDiagonal() * a;
  double value = 0.0;
  for (int n = 1; n <= max_len; ++n) {
    const Eigen::MatrixXd pgamma = P * gamma;
    value += pgamma.diagonal().sum() / n;
    if (n == max_len) {
      break;
    }
    const Eigen::MatrixXd pa = P * a;
    const Eigen::MatrixXd palpha = P * alpha;
    const Eigen::MatrixXd pbeta = P * beta;
    gamma = pgamma + mb.asDiagonal() * palpha + ma.asDiagonal() * pbeta + mab.asDiagonal() * pa;
    alpha = palpha + ma.asDiagonal() * pa;
    beta = pbeta + mb.asDiagonal() * pa;
    a = pa;
  }
  DpResult r;
  r.value = value;
  r.steps = max_len;
  r.tail_bound = loop_tail(spectral_radius_bound(m), V, max_len, disjoint_sets(ma, mb));
  if (r.tail_bound > tol) {
    throw PrecisionError("loop DP tail bound above tolerance", value, value + r.tail_bound);
  }
  return r;
}

int dp_auto_length(const LatticeModel& m, double tol) {
  if (!(tol > 0.0)) {
    throw ConfigError("dp_auto_length needs tol > 0");
  }
  const double rho = spectral_radius_bound(m);
  const double e2 = entry_vector(m).squaredNorm();
  int N = 1;
  while (excursion_tail(rho, e2, N, false) > tol || loop_tail(rho, m.size(), N, false) > tol) {
    N = N < 64 ? N + 1 : N + N / 8;
    if (N > 50'000'000) {
      throw PrecisionError("no DP length reaches the tolerance", 0.0, 0.0);
    }
  }
  return N;
}

DpResult dp_pair_intersection(const LatticeModel& m, std::span<const int> A,
                              std::span<const int> B, int max_len, double tol) {
  DpResult out;
  out.steps = max_len;
  for (int x : A) {
    for (int y : B) {
      const int xs[1] = {x};
      const int ys[1] = {y};
      const DpResult d =
          dp_excursion_moment(m, xs, ys, max_len, std::numeric_limits<double>::infinity());
      out.value += d.value * d.value;
      out.tail_bound += 2.0 * d.value * d.tail_bound + d.tail_bound * d.tail_bound;
    }
  }
  if (out.tail_bound > tol) {
    throw PrecisionError("pair DP tail bound above tolerance", out.value, out.value + out.tail_bound);
  }
  return out;
}

double green_sum(const DiscreteGreen& g, std::span<const int> A, std::span<const int> B) {
  double s = 0.0;
  for (int y : B) {
    const Eigen::VectorXd col = g.column(y);
    for (int x : A) {
      s += col[x];
    }
  }
  return s;
}

double green_square_sum(const DiscreteGreen& g, std::span<const int> A, std::span<const int> B) {
  double s = 0.0;
  for (int y : B) {
    const Eigen::VectorXd col = g.column(y);
    for (int x : A) {
      s += col[x] * col[x];
    }
  }
  return s;
}

Calibration calibrate_constants(std::span<const double> spacings,
                                std::span<const std::pair<Point, Point>> pairs) {
  if (spacings.size() < 3) {
    throw ConfigError("calibration needs at least three spacings");
  }
  if (pairs.empty()) {
    throw ConfigError("calibration needs at least one point pair");
  }
  Calibration cal;
  cal.spacings.assign(spacings.begin(), spacings.end());
  std::sort(cal.spacings.begin(), cal.spacings.end(), std::greater<>());
  for (double h : cal.spacings) {
    const LatticeModel model = LatticeModel::disc(h);
    const DiscreteGreen g(model);
    double sum = 0.0;
    for (const auto& [x, y] : pairs) {
      const int vx = model.index_of(static_cast<int>(std::lround(x.real() / h)),
                                    static_cast<int>(std::lround(x.imag() / h)));
      const int vy = model.index_of(static_cast<int>(std::lround(y.real() / h)),
                                    static_cast<int>(std::lround(y.imag() / h)));
      if (vx < 0 || vy < 0 || vx == vy) {
        throw ConfigError("calibration pair does not map to two distinct interior sites");
      }
      sum += g(vx, vy) / analytic::green_disc(model.position(vx), model.position(vy));
    }
    cal.c_G_by_spacing.push_back(sum / static_cast<double>(pairs.size()));
  }
  const std::size_t k = cal.spacings.size();
  const double h1 = cal.spacings[k - 2], h2 = cal.spacings[k - 1];
  const double c1 = cal.c_G_by_spacing[k - 2], c2 = cal.c_G_by_spacing[k - 1];
  cal.c_G = (h1 * c2 - h2 * c1) / (h1 - h2);
  cal.c_G_error = std::abs(cal.c_G - c2);
  for (std::size_t i = 0; i < k; ++i) {
    cal.residuals.push_back(std::abs(cal.c_G_by_spacing[i] - cal.c_G));
    if (i > 0 && cal.residuals[i] > cal.residuals[i - 1]) {
      cal.monotone = false;
    }
  }
  // Per-step coordinate variance of the nearest-neighbour walk, in units of h^2.
  double var = 0.0;
  for (int d = 0; d < 4; ++d) {
    var += 0.25 * kDx[d] * kDx[d];
  }
  cal.c_T = var;
  return cal;
}

GffSampler::GffSampler(const LatticeModel& m, double c_G) {
  if (m.size() > 4000) {
    throw ConfigError("GFF sampler limited to 4000 sites");
  }
  if (!(c_G > 0.0)) {
    throw ConfigError("GFF sampler needs c_G > 0");
  }
  cov_ = discrete_green(m) / (2.0 * c_G);
  cov_ = 0.5 * (cov_ + cov_.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) {
    throw ModelError("Cholesky factorization of the GFF covariance failed");
  }
  factor_ = llt.matrixL();
}

Eigen::VectorXd GffSampler::sample(RngStream& rng) const {
  Eigen::VectorXd z(factor_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
  }
  return factor_.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd dirichlet_solve(const LatticeModel& m, const std::function<double(Point)>& f) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const double h = m.spacing();
  for (int v = 0; v < m.size(); ++v) {
    const auto& [i, j] = m.site(v);
    for (int k = 0; k < 4; ++k) {
      if (m.neighbours(v)[static_cast<std::size_t>(k)] < 0) {
        const double val = f(Point{h * (i + kDx[k]), h * (j + kDy[k])});
        if (!std::isfinite(val)) {
          throw ConfigError("dirichlet_solve: boundary values must be finite");
        }
        rhs[v] += 0.25 * val;
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    }
  }
  const Eigen::VectorXd u = DiscreteGreen(m).solve(rhs);
  return u.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace occupation::lattice
