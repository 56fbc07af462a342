#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "occupation/region.hpp"
#include "occupation/rng.hpp"

namespace occupation::lattice {

/// Square-grid domain for the simple random walk. Interior sites carry an
/// index; each of the four neighbours is either interior or a boundary site.
class LatticeModel {
 public:
  /// Sites h (i, j) with |h (i, j)| < 1 - h.
  static LatticeModel disc(double h);
  /// Arbitrary interior site set (duplicates are ignored). The interior may
  /// be disconnected; each component then has its own walk.
  static LatticeModel from_sites(std::vector<std::pair<int, int>> sites, double h = 1.0);

  double spacing() const noexcept { return h_; }
  int size() const noexcept { return static_cast<int>(sites_.size()); }
  const std::pair<int, int>& site(int v) const { return sites_[static_cast<std::size_t>(v)]; }
  Point position(int v) const;
  /// Interior index of grid site (i, j), or -1.
  int index_of(int i, int j) const;
  /// Interior index or -1 for each of the neighbours (+x, -x, +y, -y).
  const std::array<int, 4>& neighbours(int v) const { return nbr_[static_cast<std::size_t>(v)]; }
  int boundary_degree(int v) const;
  /// Grid sites adjacent to the interior but not in it.
  std::vector<std::pair<int, int>> boundary_sites() const;

  /// Interior sites whose position lies in the region.
  std::vector<int> sites_in(const Region& r) const;
  /// Connected component label per interior site, labels 0..components-1.
  std::vector<int> components() const;

  /// Plain text: a spacing line, then one "interior i j" or "boundary i j" line per site.
  void dump(std::ostream& out) const;

 private:
  double h_ = 1.0;
  std::vector<std::pair<int, int>> sites_;
  std::vector<std::array<int, 4>> nbr_;
  int i_min_ = 0, j_min_ = 0, width_ = 0, height_ = 0;
  std::vector<int> lookup_;
};

/// Interior transition matrix P with entries 1/4.
Eigen::SparseMatrix<double> transition_matrix(const LatticeModel& m);

/// Entry vector e(v) = (#boundary neighbours of v) / 4: the weight of first
/// steps from the boundary into v, and of last steps out of v.
Eigen::VectorXd entry_vector(const LatticeModel& m);

/// Rigorous upper bound on the spectral radius of P (Collatz-Wielandt bound
/// from a lazy power iteration).
double spectral_radius_bound(const LatticeModel& m);

/// Expected visit counts G = (I - P)^{-1}, factorized once. Dense LDLT below
/// 500 sites, sparse LDLT above; at most 2e4 sites.
class DiscreteGreen {
 public:
  explicit DiscreteGreen(const LatticeModel& m);
  ~DiscreteGreen();
  DiscreteGreen(DiscreteGreen&&) noexcept;
  DiscreteGreen& operator=(DiscreteGreen&&) noexcept;

  int size() const noexcept { return n_; }
  /// G(., y).
  Eigen::VectorXd column(int y) const;
  double operator()(int x, int y) const;
  /// Solve (I - P) u = rhs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Full matrix; ConfigError above 5000 sites.
  Eigen::MatrixXd dense() const;

 private:
  struct Impl;
  int n_ = 0;
  std::unique_ptr<Impl> impl_;
};

Eigen::MatrixXd discrete_green(const LatticeModel& m);

struct DpResult {
  double value = 0.0;
  double tail_bound = 0.0;
  int steps = 0;
};

/// Discrete excursion measure (boundary to boundary, weight 4^-steps) of
/// l_A l_B, by forward dynamic programming over path length up to max_len.
/// PrecisionError when the geometric tail bound exceeds tol.
DpResult dp_excursion_moment(const LatticeModel& m, std::span<const int> A, std::span<const int> B,
                             int max_len, double tol = 1e-10);

/// Discrete loop measure (rooted loops weighted 4^-n / n) of l_A l_B.
DpResult dp_loop_moment(const LatticeModel& m, std::span<const int> A, std::span<const int> B,
                        int max_len, double tol = 1e-10);

/// Smallest length for which both tail bounds above (in their worst,
/// overlapping-set form) fall below tol.
int dp_auto_length(const LatticeModel& m, double tol);

/// Product of two independent discrete excursion measures applied to
/// (sum_{x in A} l1_x l2_x)(sum_{y in B} l1_y l2_y).
DpResult dp_pair_intersection(const LatticeModel& m, std::span<const int> A,
                              std::span<const int> B, int max_len, double tol = 1e-10);

/// Sum of G over A x B and of G^2 over A x B, straight from the matrix.
double green_sum(const DiscreteGreen& g, std::span<const int> A, std::span<const int> B);
double green_square_sum(const DiscreteGreen& g, std::span<const int> A, std::span<const int> B);

struct Calibration {
  double c_G = 0.0;
  double c_G_error = 0.0;  ///< |Richardson value - finest-grid value|
  double c_T = 0.0;
  std::vector<double> spacings;
  std::vector<double> c_G_by_spacing;
  std::vector<double> residuals;  ///< |c_G(h) - c_G| per spacing
  bool monotone = true;           ///< residuals decrease as h shrinks
};

/// Fits G_disc(x_h, y_h) = c_G G_U(x_h, y_h) at the given continuum pairs on
/// disc models of the given spacings (at least 3), with linear Richardson
/// extrapolation in h; c_T is the exact per-step coordinate variance / h^2.
Calibration calibrate_constants(std::span<const double> spacings,
                                std::span<const std::pair<Point, Point>> pairs);

/// Centered Gaussian field with covariance G_disc / (2 c_G); at most 4000 sites.
class GffSampler {
 public:
  GffSampler(const LatticeModel& m, double c_G);
  Eigen::VectorXd sample(RngStream& rng) const;
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

 private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;
};

/// Discrete harmonic extension of boundary data f (evaluated at boundary
/// site positions), clamped to [min f, max f].
Eigen::VectorXd dirichlet_solve(const LatticeModel& m, const std::function<double(Point)>& f);

}  // namespace occupation::lattice
