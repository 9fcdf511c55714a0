#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/radial.hpp"

namespace gmclab::tailest {

struct SurvivalPoint {
  double t = 0.0;
  double phat = 0.0;
  double stderr = 0.0;
  bool boundary = false;  ///< phat is 0 or 1, so the binomial error is degenerate
};

/// Fraction of samples strictly above each t, with binomial standard errors.
/// EmptySample for no samples; InvalidArgument if ts is not increasing.
std::vector<SurvivalPoint> survival_curve(std::span<const double> samples, std::span<const double> ts);

enum class FitMethod { LogLogWLS, Hill };

struct TailFit {
  double exponent = 0.0;  ///< P ~ constant * t^{-exponent}
  double constant = 0.0;
  double stderr_exponent = 0.0;
  double stderr_constant = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  int n_points = 0;
  FitMethod method = FitMethod::LogLogWLS;
};

/// Weighted least squares of ln phat on ln t over points in [t_min, t_max]
/// with 0 < phat < 1, weights phat^2 / stderr^2. DegenerateWindow with fewer
/// than 8 usable points.
TailFit fit_tail(std::span<const SurvivalPoint> curve, double t_min, double t_max);

/// Same window, exponent held fixed; only the constant is fitted.
TailFit fit_constant(std::span<const SurvivalPoint> curve, double t_min, double t_max, double exponent);

/// Hill estimator over the k largest samples. DegenerateWindow unless
/// samples.size() >= 1000 and 2 <= k < samples.size().
TailFit fit_tail_hill(std::span<const double> samples, std::size_t k);

/// Empirical quantile (linear interpolation), q in [0, 1].
double quantile(std::span<const double> samples, double q);

/// Log-spaced grid of n points from lo to hi.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

// ----------------------------------------------------------------------------
// Grid route

struct GridModel {
  fieldsim::Grid grid;
  fieldsim::KernelSpec kernel = fieldsim::KernelSpec::exact_scaling_neumann();
  fieldsim::CovFactor factor;
  gmc::GmcParams params;
  gmc::Weights plain;
};

GridModel make_grid_model(double gamma, double r, int n_bulk, int n_bdy,
                          fieldsim::KernelSpec kernel = fieldsim::KernelSpec::exact_scaling_neumann());

/// Fields are drawn in fixed blocks of this many replicas; replica n always
/// uses stream derive_stream(Field, n).
inline constexpr std::size_t kFieldBlock = 256;

/// Calls body(first_replica, exponentials) for consecutive blocks covering [0, N).
/// Blocks run on `threads` workers; body must only write replica-indexed output.
void for_each_field_block(const GridModel& model, std::size_t N, std::uint64_t seed, std::size_t threads,
                          const std::function<void(std::size_t, const gmc::BatchExponentials&)>& body);

/// Per-replica output of the boundary-localization importance sampler.
/// Replica n and boundary node j: bulk mass of the field shifted by
/// (gamma/2) C_{., j}, and the reciprocal of the shifted boundary mass.
/// Shifting by a covariance column is the exact discrete Girsanov tilt by the
/// boundary weight of node j, so the same unshifted draw serves every j.
struct LocalizedSamples {
  double seg_len = 0.0;
  double total_length = 0.0;
  std::vector<double> plain_bulk;  ///< mu^H(Q_r), N
  std::vector<double> plain_bdy;   ///< mu^bdy(I_r), N
  Eigen::MatrixXd loc_bulk;        ///< n_bdy x N
  Eigen::MatrixXd inv_loc_bdy;     ///< n_bdy x N

  std::size_t size() const noexcept { return plain_bulk.size(); }
};

LocalizedSamples sample_localized(const GridModel& model, std::size_t N, std::uint64_t seed, std::size_t threads = 1);

struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t n = 0;
};

/// seg_len * sum_j mean_n 1{loc_bulk(j, n) > t} * inv_loc_bdy(j, n).
Estimate localized_estimate(const LocalizedSamples& samples, double t);
/// Number of (replica, node) pairs with loc_bulk > t.
std::size_t localized_exceedances(const LocalizedSamples& samples, double t);
std::vector<SurvivalPoint> localized_curve(const LocalizedSamples& samples, std::span<const double> ts);

/// Convenience wrapper: estimate of P[mu^H(Q_r) > t] from N replicas.
Estimate localized_tail_estimator(const GridModel& model, double t, std::size_t N, std::uint64_t seed,
                                  std::size_t threads = 1);

struct FitWindow {
  double t_min = 0.0;
  double t_max = 0.0;
};

/// [95th percentile of plain mu^H, largest t of `ts` with >= min_exceedances
/// importance-sampled exceedances].
FitWindow default_window(const LocalizedSamples& samples, std::span<const double> ts,
                         std::size_t min_exceedances = 50);

struct StabilityPoint {
  double t_min = 0.0;
  double t_max = 0.0;
  double exponent = 0.0;
  double stderr = 0.0;
};

/// Fits over sliding sub-windows [t, t * width_factor] of `window`.
std::vector<StabilityPoint> stability_series(std::span<const SurvivalPoint> curve, FitWindow window,
                                             double width_factor, std::size_t steps);

/// Longest run of at least `min_run` consecutive entries whose exponents stay
/// within `spread` of each other and whose range, widened by two of the run's
/// largest standard errors, contains the target.
struct Plateau {
  bool found = false;
  std::size_t begin = 0;
  std::size_t length = 0;
  double low = 0.0;
  double high = 0.0;
};
Plateau find_plateau(std::span<const StabilityPoint> series, double target, double spread, std::size_t min_run = 3);

/// Reweighting vs shifting estimates of E[f(mu^H) mu^bdy(I_r)] / E[mu^bdy(I_r)].
struct GirsanovComparison {
  Estimate reweighted;
  Estimate shifted;
  double z_score = 0.0;
};
GirsanovComparison girsanov_comparison(const GridModel& model, const std::function<double(double)>& f,
                                       std::size_t N, std::uint64_t seed, std::size_t threads = 1);

/// Sample means of mu^H(Q_r) and mu^bdy(I_r) with their exact targets.
struct RenormalizationCheck {
  Estimate bulk;
  Estimate bdy;
  double bulk_target = 0.0;
  double bdy_target = 0.0;
};
RenormalizationCheck renormalization_means(const GridModel& model, std::size_t N, std::uint64_t seed,
                                           std::size_t threads = 1);

struct LocalityGap {
  double t = 0.0;
  Estimate gap;    ///< full term minus local term
  Estimate local;  ///< E[1{mu_v^H(Q(v, rho)) > t} / mu_v^bdy(I(v, rho))]
};

/// Localized masses from the tilt at v (continuous kernel values off-node).
/// GeometryViolation unless 2 rho < min(r - v, v + r).
std::vector<LocalityGap> locality_gap(const GridModel& model, double v, double rho, std::span<const double> ts,
                                      std::size_t N, std::uint64_t seed, std::size_t threads = 1);

/// Per-replica masses needed by locality_gap, exposed for choosing t.
struct LocalityMasses {
  std::vector<double> full_bulk, full_bdy, local_bulk, local_bdy;
};
LocalityMasses locality_masses(const GridModel& model, double v, double rho, std::size_t N, std::uint64_t seed,
                               std::size_t threads = 1);
std::vector<LocalityGap> locality_gap(const LocalityMasses& masses, std::span<const double> ts);

// ----------------------------------------------------------------------------
// Radial route and moments

struct ConstantEstimate {
  double constant = 0.0;
  double stderr = 0.0;
  double mean_integrand = 0.0;
  double trimmed_constant = 0.0;  ///< with the top `trim` fraction removed
  double ci_low = 0.0;            ///< bootstrap percentile interval of the constant
  double ci_high = 0.0;
  std::size_t n = 0;
  std::size_t truncation_failures = 0;
};

/// 2r (1 - gamma^2/4).
double radial_prefactor(double gamma, double r);

struct ConstantOptions {
  double trim = 1e-3;
  std::size_t bootstrap = 400;
  double confidence = 0.95;
  /// Test hook: replaces I^H(inf)^{2/gamma^2} / I^bdy(inf) for replica n.
  std::function<double(std::size_t)> integrand_override;
};

/// C = 2r (1 - gamma^2/4) E[I^H(inf)^{2/gamma^2} / I^bdy(inf)].
ConstantEstimate estimate_constant_radial(double gamma, double r, const radial::RadialConfig& config, std::size_t N,
                                          std::uint64_t seed, std::size_t threads = 1,
                                          const ConstantOptions& options = {});

/// Mean with heavy-tail diagnostics, shared by the constant and moment estimators.
ConstantEstimate summarize_heavy(std::span<const double> values, double scale, std::uint64_t seed,
                                 const ConstantOptions& options);

/// p < min(2/gamma^2 + q/2, 4/gamma^2).
bool finite_predicted(double gamma, double p, double q);

struct QuotientMomentEstimate {
  double p = 0.0;
  double q = 0.0;
  double estimate = 0.0;
  double stderr = 0.0;
  std::size_t n = 0;
  bool finite_predicted = false;
  std::vector<double> running_mean;  ///< at n = 2^k, diagnostic only
};

/// Joint radial samples of (I^H(x), I^bdy(x)) for each x (infinity allowed).
/// Result (k, n) holds the pair for xs[k] and replica n.
struct RadialISamples {
  std::vector<double> xs;
  std::vector<std::vector<double>> IH;
  std::vector<std::vector<double>> Ibdy;
  std::size_t truncation_failures = 0;
};
RadialISamples sample_radial_integrals(double gamma, const radial::RadialConfig& config, std::span<const double> xs,
                                       std::size_t N, std::uint64_t seed, std::size_t threads = 1);

QuotientMomentEstimate quotient_moment(std::span<const double> bulk, std::span<const double> bdy, double gamma,
                                       double p, double q);

/// Grid mode: localized masses over the half-disc Q(v, rho) and I(v, rho),
/// or their complements inside Q_r and I_r.
struct ScalingSweep {
  std::vector<double> rhos;
  std::vector<QuotientMomentEstimate> scaling;     ///< Q(v, rho), I(v, rho)
  std::vector<QuotientMomentEstimate> complement;  ///< Q_r \ Q(v, rho), I_r \ I(v, rho)
  double slope = 0.0;
  double slope_stderr = 0.0;
  double complement_slope = 0.0;
  double zeta = 0.0;
};
ScalingSweep quotient_scaling_sweep(const GridModel& model, double v, std::span<const double> rhos, double p, double q,
                                    std::size_t N, std::uint64_t seed, std::size_t threads = 1);

/// Plain localized bulk masses mu_v^H(Q(v, rho)) per replica (no tilt).
std::vector<double> localized_region_masses(const GridModel& model, double v, double rho, std::size_t N,
                                            std::uint64_t seed, std::size_t threads = 1);

/// Slope of ln y on ln x by weighted least squares (weights 1/var of ln y).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
LineFit loglog_fit(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr);

/// (2 - gamma^2/2)(p - q/2) - gamma^2 (p - q/2)^2.
double zeta_tilde(double p, double q, double gamma);

enum class FeasibilitySystem { Eq16, Eq20 };

/// Parses "Eq16" / "Eq20" (case-insensitive, optional "eq." / "(16)" forms);
/// InvalidArgument otherwise.
FeasibilitySystem parse_system(std::string_view name);
std::string_view to_string(FeasibilitySystem system);

struct FeasibleParams {
  double p = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double dp = 0.0;
  FeasibilitySystem system = FeasibilitySystem::Eq16;
  bool verified = false;
};

/// Smallest slack over all strict inequalities of the system (negative when violated).
double feasibility_slack(double gamma, const FeasibleParams& params);
bool check_feasible(double gamma, const FeasibleParams& params, double min_slack = 1e-9);

/// Witness: p = (2/gamma^2)(1 + 1e-3), then eta, then delta from half the
/// remaining slack. Infeasible if the checker rejects it.
FeasibleParams feasible_params(double gamma, FeasibilitySystem system);

/// int_{-r}^{r} exp((2/gamma^2 - 1) g(v, v)) dv by adaptive Gauss-Kronrod.
/// QuadratureUnstable when the error estimate exceeds tolerance * |result|.
double perturbed_constant_factor(const std::function<double(double)>& g_diag, double r, double gamma,
                                 double tolerance = 1e-10);

}  // namespace gmclab::tailest
