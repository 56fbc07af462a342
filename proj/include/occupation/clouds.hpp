#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "occupation/estimators.hpp"
#include "occupation/quadrature.hpp"
#include "occupation/rng.hpp"
#include "occupation/sampler.hpp"

namespace occupation::clouds {

/// Test functions are piecewise-constant densities over regions.
using TestFunction = analytic::Density;

/// Largest admissible mean number of paths in one cloud.
inline constexpr double kMaxCloudMass = 1e7;

/// A Poisson sample of excursions, each carrying a fair random sign.
struct Cloud {
  std::vector<sampler::Path> paths;
  std::vector<int> signs;
  double intensity = 0.0;
  double eps_used = 0.0;
};

/// Mean number of excursions in a cloud of intensity c: c * 2 pi / eps.
double excursion_cloud_mass(double c, double eps);

/// Poisson(c * 2 pi / eps) independent excursions with independent signs.
/// ConfigError when c < 0 or the mean count exceeds kMaxCloudMass.
Cloud sample_excursion_cloud(double c, const sampler::ExcursionConfig& cfg, RngStream& rng);

/// Mean of int f(gamma_s) ds under the eps-excursion measure:
/// (2 / eps) int f(y) log(1 / max(1 - eps, |y|)) dy. For f inside the
/// (1 - eps) disc this is 2 int f * (-log(1 - eps) / eps).
double excursion_occupation_mean(const TestFunction& f, double eps);

/// Occupation integral of f along one path (left-endpoint Riemann sum).
double path_integral(const sampler::Path& p, const TestFunction& f);

struct CloudStatistics {
  double X = 0.0;           ///< sum over paths of int f
  double X_centered = 0.0;  ///< X minus its exact mean
  double Y = 0.0;           ///< signed sum
};

CloudStatistics cloud_statistics(const Cloud& cloud, const TestFunction& f);

/// Samples (X_f, Y_f) for a whole family of test functions at once without
/// storing paths. With `restrict_to_support`, only excursions that reach the
/// circle |z| = R enclosing every support are simulated: their number is
/// Poisson with mean c (2 pi / eps) log(1 - eps) / log R and, by rotation
/// invariance and the strong Markov property, they start uniformly on that
/// circle. Excursions that never reach it contribute nothing.
class ExcursionCloudSampler {
 public:
  ExcursionCloudSampler(std::vector<TestFunction> family, double c, sampler::ExcursionConfig cfg,
                        bool restrict_to_support = true);

  std::size_t family_size() const noexcept { return family_.size(); }
  /// Mean number of simulated excursions per cloud.
  double simulated_mass() const noexcept { return mass_; }
  double support_radius() const noexcept { return radius_; }
  /// Exact E[X_f] for family member i.
  double centering(std::size_t i) const { return centering_.at(i); }

  /// One cloud: X[i] and Y[i] for every family member.
  void sample(RngStream& rng, std::span<double> X, std::span<double> Y) const;

 private:
  std::vector<TestFunction> family_;
  std::vector<Region> regions_;
  std::vector<std::vector<std::pair<std::size_t, double>>> weights_;
  std::vector<double> centering_;
  sampler::ExcursionConfig cfg_;
  double c_ = 0.0;
  double mass_ = 0.0;
  double radius_ = 1.0;
  bool restricted_ = false;
};

struct FluctuationSample {
  double value = 0.0;
  int n_clouds = 0;
  std::string f_descriptor;
};

/// Replica values (Y^1 + ... + Y^N) / sqrt N, and the same for X centered,
/// one row per replica and one column per family member.
struct CltTable {
  Eigen::MatrixXd y;
  Eigen::MatrixXd x_centered;
  int n_clouds = 0;
};

/// Replicas are split over opt.tasks tasks; task t uses stream
/// opt.stream_base + t. ConfigError unless N >= 1 and n_replicas >= 2.
CltTable clt_family(std::span<const TestFunction> family, int N, double c, std::size_t n_replicas,
                    const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt);

struct CltSamples {
  std::vector<FluctuationSample> y;
  std::vector<FluctuationSample> x_centered;
};

/// Single test function version. Requires N >= 16 and n_replicas >= 1000.
CltSamples clt_fluctuation(int N, double c, const TestFunction& f, std::size_t n_replicas,
                           const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt);

struct ReplicaSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;  ///< sqrt((m4 - m2^2) / n)
  double excess_kurtosis = 0.0;
};

ReplicaSummary summarize(std::span<const double> values);
ReplicaSummary summarize(std::span<const FluctuationSample> samples);

/// Human-readable id of a test function, e.g. "1*disc(0.3,0;0.2)".
std::string describe(const TestFunction& f);

struct GffLatticeOptions {
  double h = 0.05;
  std::size_t draws = 10000;
  double c_G = 0.0;  ///< 0: calibrate on spacings {0.1, 0.05, 0.025}
};

struct GffReport {
  Eigen::MatrixXd empirical;          ///< covariance of the Y replicas
  Eigen::MatrixXd empirical_centered; ///< covariance of the X centered replicas
  Eigen::MatrixXd target;             ///< 8 * gff_covariance(f_i, f_j)
  Eigen::MatrixXd standard_error;     ///< per-entry standard error of `empirical`
  Eigen::MatrixXd standard_error_centered;
  /// 8 F_i^T C F_j with C = G_disc / (2 c_G) and F_i(v) the integral of f_i
  /// over the lattice cell of site v.
  Eigen::MatrixXd lattice_exact;
  Eigen::MatrixXd lattice_empirical;  ///< same from direct Gaussian draws
  double c_G = 0.0;
  std::size_t n_replicas = 0;
  int n_clouds = 0;
};

/// Covariance of CLT replicas across a family of at most 8 test functions,
/// against 8 gff_covariance and against the calibrated lattice field.
/// The lattice draws use stream opt.stream_base + opt.tasks.
GffReport gff_compare(std::span<const TestFunction> family, int N, std::size_t n_replicas,
                      const sampler::ExcursionConfig& cfg, const estimators::RunOptions& opt,
                      const GffLatticeOptions& lattice = {}, double c = 1.0);

/// Signed loop soup restricted to loops that visit the support S.
struct LoopSoupResult {
  std::vector<FluctuationSample> y;
  std::vector<FluctuationSample> x_centered;
  double loops_per_cloud = 0.0;        ///< Poisson mean before rejection
  double r_min = 0.0;                  ///< smallest root radius simulated
  std::vector<double> bucket_means;    ///< pilot E[X_k], k = 1..buckets
  std::size_t rejected = 0;            ///< loops that missed S
  std::size_t kept = 0;
  std::size_t truncated = 0;
  double target = 0.0;                 ///< int int G^2 f f
};

/// Roots r e^{i theta} with r log-uniform on [r_min, 1] and theta uniform, at
/// rate c (2 - eps) / eps^2 per unit log r; this is the eps loop measure of
/// the loop estimator written as a Poisson intensity, where each root's weight
/// is constant. r_min is the larger of spec.r_min and the smallest modulus of
/// S. X centered subtracts per-bucket means E[X_k] over lifetime buckets
/// {1/k < tau <= 1/(k-1)} (last bucket: all shorter loops), estimated from
/// `pilot_replicas` independent clouds on streams opt.stream_base + opt.tasks + t.
LoopSoupResult loop_soup_signed(double c, const estimators::LoopSpec& spec, const Region& S,
                                const TestFunction& f, int N, std::size_t n_replicas,
                                const estimators::RunOptions& opt, int buckets = 8,
                                std::size_t pilot_replicas = 200);

}  // namespace occupation::clouds
