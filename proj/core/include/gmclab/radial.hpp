#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace gmclab::radial {

/// Drifted process sqrt(2) B_s - alpha s with alpha = 2/gamma - gamma/2.
struct DriftSpec {
  double gamma = 1.0;

  void validate() const;  ///< InvalidArgument unless 0 < gamma < 2
  double alpha() const noexcept { return 2.0 / gamma - 0.5 * gamma; }
};

/// Maximum of sqrt(2) B_s - alpha s over s >= 0: Exponential(alpha), by inversion.
double sample_max(const DriftSpec& spec, std::uint64_t seed, std::uint64_t replica = 0);

/// Maximum of B_s - alpha s for unit-variance B: Exponential(2 alpha).
double sample_max_unit(double alpha, std::uint64_t seed, std::uint64_t replica = 0);

/// Path on the grid s_k = k ds, k = 0 .. values.size() - 1.
struct Path {
  double ds = 0.0;
  std::vector<double> values;
};

/// sqrt(2) B_s - alpha s conditioned to stay negative, started at -eps.
/// Realized exactly at the grid points as -sqrt(2) |X_s| with X a 3-d Brownian
/// motion with drift (alpha / sqrt 2) e_1 started at radius eps / sqrt 2 in a
/// von Mises-Fisher direction. eps = 0 is the entrance law from 0.
/// DegenerateStart for eps < 0; InvalidArgument for T <= 0 or ds <= 0.
Path sample_conditioned_path(const DriftSpec& spec, double T, double ds, double eps, std::uint64_t seed,
                             std::uint64_t stream);

/// Two-sided conditioned path B^gamma: right[k] = B(k ds), left[k] = B(-k ds),
/// both starting at 0. The concatenated process M + B peaks at M at s = 0.
struct TwoSidedPath {
  double ds = 0.0;
  double M = 0.0;
  std::vector<double> right;
  std::vector<double> left;
  /// Last left index with left[k] >= -M (the grid version of L_{-M}); the
  /// crossing inside the following step is at fraction left_fraction.
  std::size_t left_cut = 0;
  double left_fraction = 0.0;

  /// M + B at grid time k ds, k may be negative.
  double absolute(std::ptrdiff_t k) const;
};

/// IndexMismatch when the step sizes differ; InvalidArgument for M < 0 or a
/// path that does not start at 0.
TwoSidedPath williams_concatenate(double M, const Path& descent, const Path& reversed_ascent);

/// Last grid index (and fractional crossing) where a path stays >= -x.
/// TruncationTooShort if the path never drops below -x within its horizon.
std::pair<std::size_t, double> last_passage(const std::vector<double>& path, double x);

struct LateralOptions {
  int n_theta = 64;  ///< interior theta cells
  int n_modes = 64;  ///< Fourier modes kept in Y^H
};

/// Angular geometry of Y^H shared by every sample of a given (gamma, options).
struct LateralBasis {
  double gamma = 0.0;
  std::vector<double> theta;         ///< interior cell midpoints
  std::vector<double> theta_weight;  ///< cell integrals of (sin theta)^{-gamma^2/2}
  Eigen::VectorXd interior_var;      ///< truncated Var Y(theta_k)
  double ray_var = 0.0;              ///< truncated Var Y(0) = Var Y(pi)
  Eigen::MatrixXd modes;             ///< n_modes x n_theta, sqrt(2/n) cos(n theta_k)
  Eigen::VectorXd ray0;              ///< sqrt(2/n)
  Eigen::VectorXd ray_pi;            ///< (-1)^n sqrt(2/n)
  double mean_ZH = 0.0;              ///< sum of theta_weight, equals E[Z^H_s]
  double window = 0.0;               ///< excluded end-cell half width (0 unless gamma^2/2 >= 1)

  int n_modes() const noexcept { return static_cast<int>(ray0.size()); }
};

LateralBasis make_lateral_basis(double gamma, LateralOptions options = {});

/// Y^H sampled on slices s_k = s_begin + k ds as sum_n sqrt(2/n) cos(n theta) U_n(s)
/// with independent stationary OU processes U_n of rate n (exact AR(1) steps).
struct LateralSample {
  double s_begin = 0.0;
  double ds = 0.0;
  std::vector<double> ZH;    ///< zero outside [bulk_begin, bulk_end)
  std::vector<double> Zbdy;
  std::size_t bulk_begin = 0;
  std::size_t bulk_end = 0;
  Eigen::MatrixXd Y;  ///< optional: slices x (n_theta + 2), columns theta_1.., then 0 and pi
};

/// Z^H is evaluated on slices [bulk_begin, bulk_end) only (all slices by default).
LateralSample sample_lateral(const LateralBasis& basis, double s_begin, std::size_t n_slices, double ds,
                             std::uint64_t seed, std::uint64_t stream, bool keep_field = false,
                             std::size_t bulk_begin = 0, std::size_t bulk_end = std::numeric_limits<std::size_t>::max());

/// Covers s in [-T, T].
LateralSample sample_lateral(double gamma, double T, double ds, LateralOptions options, std::uint64_t seed,
                             std::uint64_t stream = 0, bool keep_field = false);

struct IValues {
  double IH = 0.0;
  double Ibdy = 0.0;
  double bound_H = 0.0;    ///< estimate of the neglected bulk mass beyond the horizon
  double bound_bdy = 0.0;  ///< same for the boundary integral
};

/// Integrals of e^{gamma B} Z^H and e^{gamma B / 2} Z^bdy from -L_{-x} to the
/// right end (x = +infinity integrates the whole left side). lateral slice 0
/// sits at s = -(left.size() - 1) ds. Between slices the integrand is
/// interpolated log-linearly. Bounds use E[Z] and the drift from the last
/// slice on. TruncationTooShort when bound > tolerance * integral.
IValues compute_I(const TwoSidedPath& path, const LateralSample& lateral, const LateralBasis& basis, double x,
                  double tolerance = 1e-3);

/// Controls the horizon, grid and truncation of one joint radial sample.
struct RadialConfig {
  double T = 30.0;
  double ds = 0.05;
  double eps = 1e-3;
  LateralOptions lateral{};
  double log_cutoff = -18.0;  ///< slices with exponent below this are dropped
  double tolerance = 1e-3;
};

/// Horizon max(30, 3 ln(t_max) / (gamma alpha)).
double default_horizon(double gamma, double t_max);

/// Two-sided path (M = 0) and lateral field over the active slices: slices
/// whose exponent (gamma/2) B stays above config.log_cutoff, with Z^H only
/// where gamma B does.
struct JointSample {
  TwoSidedPath path;
  LateralSample lateral;
};
JointSample sample_joint(const LateralBasis& basis, const RadialConfig& config, std::uint64_t seed,
                         std::uint64_t replica);

/// Joint sample of (I^H(inf), I^bdy(inf)) built from two independent
/// conditioned paths and one lateral field, restricted to active slices.
IValues sample_I_infinity(const LateralBasis& basis, const RadialConfig& config, std::uint64_t seed,
                          std::uint64_t replica);

/// rho^{2 - gamma^2/2} e^{gamma N_rho} e^{gamma M} I^H(M), N_rho ~ N(0, -2 ln rho).
/// InvalidRho unless 0 < rho < 1.
double radial_bulk_mass(const LateralBasis& basis, const RadialConfig& config, double rho, std::uint64_t seed,
                        std::uint64_t replica);

}  // namespace gmclab::radial
