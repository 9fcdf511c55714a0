#include "gmclab/radial.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gmclab/error.hpp"
#include "gmclab/rng.hpp"

namespace gmclab::radial {
namespace {

constexpr double kPi = std::numbers::pi;

void check_grid(double T, double ds) {
  if (!(T > 0.0) || !(ds > 0.0) || !std::isfinite(T) || !std::isfinite(ds) || ds > T) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < ds <= T");
  }
}

// Direction on the unit sphere with density proportional to exp(kappa * w), w = first coordinate.
std::array<double, 3> von_mises_fisher(double kappa, RandomStream& rng) {
  const double u = rng.uniform();
  double w = 0.0;
  if (kappa < 1e-8) {
    w = 2.0 * u - 1.0;
  } else {
    w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
  }
  w = std::clamp(w, -1.0, 1.0);
  const double phi = 2.0 * kPi * rng.uniform();
  const double t = std::sqrt(std::max(0.0, 1.0 - w * w));
  return {w, t * std::cos(phi), t * std::sin(phi)};
}

// ds * integral over one step of log-linear interpolation between f0 and f1, up to fraction `part`.
double log_linear(double f0, double f1, double ds, double part = 1.0) {
  if (f0 <= 0.0 || f1 <= 0.0) return 0.5 * (f0 + f1) * ds * part;
  const double l = std::log(f1 / f0);
  if (std::abs(l) < 1e-9) return f0 * ds * part * (1.0 + 0.5 * l * part);
  return f0 * ds * std::expm1(l * part) / l;
}

enum class Parts { Both, BulkOnly };

IValues integrate(const TwoSidedPath& path, const LateralSample& lateral, const LateralBasis& basis, double x,
                  double tolerance, Parts parts) {
  if (lateral.ds != path.ds) throw Error(ErrorCode::IndexMismatch, "path and lateral field use different ds");
  if (path.left.empty() || path.right.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
  const std::size_t offset = path.left.size() - 1;  // lateral index of s = 0
  const std::size_t n = offset + path.right.size();
  if (lateral.Zbdy.size() != n || lateral.ZH.size() != n) {
    throw Error(ErrorCode::IndexMismatch, "lateral slices do not cover the path");
  }
  const double gamma = basis.gamma;
  const double ds = path.ds;
  const double drift = 2.0 / gamma - 0.5 * gamma;
  auto B = [&](std::size_t i) { return i >= offset ? path.right[i - offset] : path.left[offset - i]; };

  // Lateral index range [lo, hi] and a fractional step to the left of lo.
  std::size_t lo = 0;
  double fraction = 0.0;
  const bool finite_x = std::isfinite(x);
  if (finite_x) {
    const auto [cut, frac] = last_passage(path.left, x);
    lo = offset - cut;
    fraction = frac;
  }
  const std::size_t hi = n - 1;

  IValues out;
  const double mean_bdy = 2.0;
  auto tail = [&](double b_end, double coupling, double mean_z) {
    // Neglected mass beyond an end slice, drift halved for safety.
    return mean_z * std::exp(coupling * b_end) / (0.5 * coupling * drift);
  };

  // Bulk part.
  const std::size_t blo = std::max(lo, lateral.bulk_begin);
  const std::size_t bhi = std::min(hi + 1, lateral.bulk_end);  // exclusive
  auto fH = [&](std::size_t i) { return std::exp(gamma * B(i)) * lateral.ZH[i]; };
  if (bhi > blo) {
    for (std::size_t i = blo; i + 1 < bhi; ++i) out.IH += log_linear(fH(i), fH(i + 1), ds);
    if (fraction > 0.0 && blo == lo && lo > 0 && lateral.bulk_begin < lo) {
      out.IH += log_linear(fH(lo), fH(lo - 1), ds, fraction);
    }
  }
  double skipped_H = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) {
    if (i < blo || i >= bhi) skipped_H += ds * basis.mean_ZH * std::exp(gamma * B(i));
  }
  out.bound_H = skipped_H + tail(path.right.back(), gamma, basis.mean_ZH);
  if (!finite_x) out.bound_H += tail(path.left.back(), gamma, basis.mean_ZH);

  if (parts == Parts::Both) {
    auto fD = [&](std::size_t i) { return std::exp(0.5 * gamma * B(i)) * lateral.Zbdy[i]; };
    for (std::size_t i = lo; i < hi; ++i) out.Ibdy += log_linear(fD(i), fD(i + 1), ds);
    if (fraction > 0.0 && lo > 0) out.Ibdy += log_linear(fD(lo), fD(lo - 1), ds, fraction);
    out.bound_bdy = tail(path.right.back(), 0.5 * gamma, mean_bdy);
    if (!finite_x) out.bound_bdy += tail(path.left.back(), 0.5 * gamma, mean_bdy);
  }

  const bool short_H = out.bound_H > tolerance * out.IH;
  const bool short_bdy = parts == Parts::Both && out.bound_bdy > tolerance * out.Ibdy;
  if (short_H || short_bdy) {
    std::ostringstream msg;
    msg << "neglected mass bound " << (short_H ? out.bound_H : out.bound_bdy) << " exceeds tolerance "
        << tolerance << " relative to " << (short_H ? out.IH : out.Ibdy);
    throw Error(ErrorCode::TruncationTooShort, msg.str());
  }
  return out;
}

// One past the last index whose exponent coupling * path stays above cutoff.
std::size_t active_length(const std::vector<double>& path, double coupling, double cutoff) {
  std::size_t last = 0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (coupling * path[k] > cutoff) last = k;
  }
  return std::min(path.size(), last + 2);
}

Path trimmed(const Path& path, std::size_t length) {
  Path out;
  out.ds = path.ds;
  out.values.assign(path.values.begin(), path.values.begin() + static_cast<std::ptrdiff_t>(length));
  return out;
}

}  // namespace

void DriftSpec::validate() const {
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
}

double sample_max(const DriftSpec& spec, std::uint64_t seed, std::uint64_t replica) {
  spec.validate();
  RandomStream rng(seed, derive_stream(StreamDomain::Maximum, replica));
  return rng.exponential(spec.alpha());
}

double sample_max_unit(double alpha, std::uint64_t seed, std::uint64_t replica) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "drift must be positive");
  RandomStream rng(seed, derive_stream(StreamDomain::Maximum, replica));
  return rng.exponential(2.0 * alpha);
}

Path sample_conditioned_path(const DriftSpec& spec, double T, double ds, double eps, std::uint64_t seed,
                             std::uint64_t stream) {
  spec.validate();
  check_grid(T, ds);
  if (eps < 0.0 || !std::isfinite(eps)) throw Error(ErrorCode::DegenerateStart, "start must be <= 0");
  const double mu = spec.alpha() / std::numbers::sqrt2;
  const double radius = eps / std::numbers::sqrt2;
  RandomStream rng(seed, stream);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  if (radius > 0.0) {
    const auto dir = von_mises_fisher(mu * radius, rng);
    for (int c = 0; c < 3; ++c) x[c] = radius * dir[c];
  }
  const auto steps = static_cast<std::size_t>(std::llround(T / ds));
  Path path;
  path.ds = ds;
  path.values.resize(steps + 1);
  path.values[0] = -eps;
  const double sd = std::sqrt(ds);
  for (std::size_t k = 1; k <= steps; ++k) {
    x[0] += sd * rng.normal() + mu * ds;
    x[1] += sd * rng.normal();
    x[2] += sd * rng.normal();
    path.values[k] = -std::numbers::sqrt2 * std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  }
  return path;
}

double TwoSidedPath::absolute(std::ptrdiff_t k) const {
  if (k >= 0) return M + right.at(static_cast<std::size_t>(k));
  return M + left.at(static_cast<std::size_t>(-k));
}

std::pair<std::size_t, double> last_passage(const std::vector<double>& path, double x) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
  if (path.back() >= -x) {
    std::ostringstream msg;
    msg << "path never drops below " << -x << " within its horizon";
    throw Error(ErrorCode::TruncationTooShort, msg.str());
  }
  if (path[0] < -x) return {0, 0.0};
  std::size_t k = path.size() - 1;
  while (k > 0 && path[k - 1] < -x) --k;
  // path[k - 1] >= -x > path[k]
  const std::size_t cut = k - 1;
  const double fraction = (path[cut] + x) / (path[cut] - path[k]);
  return {cut, fraction};
}

TwoSidedPath williams_concatenate(double M, const Path& descent, const Path& reversed_ascent) {
  if (descent.ds != reversed_ascent.ds) throw Error(ErrorCode::IndexMismatch, "paths use different ds");
  if (!(M >= 0.0)) throw Error(ErrorCode::InvalidArgument, "maximum must be >= 0");
  if (descent.values.empty() || reversed_ascent.values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty path");
  }
  TwoSidedPath out;
  out.ds = descent.ds;
  out.M = M;
  out.right = descent.values;
  out.left = reversed_ascent.values;
  // Both sides meet at s = 0; a small negative start (eps) is pinned to 0.
  out.right[0] = 0.0;
  out.left[0] = 0.0;
  if (M == 0.0) {
    out.left_cut = 0;
    out.left_fraction = 0.0;
  } else {
    std::tie(out.left_cut, out.left_fraction) = last_passage(out.left, M);
  }
  return out;
}

LateralBasis make_lateral_basis(double gamma, LateralOptions options) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  if (options.n_theta < 2 || options.n_modes < 1) throw Error(ErrorCode::InvalidArgument, "lateral grid too small");
  const double a = 0.5 * gamma * gamma;
  const int n_theta = options.n_theta;
  const int K = options.n_modes;
  const double dtheta = kPi / n_theta;
  LateralBasis basis;
  basis.gamma = gamma;
  basis.window = a >= 1.0 ? 0.5 * dtheta : 0.0;
  basis.theta.resize(n_theta);
  basis.theta_weight.resize(n_theta);
  using boost::math::quadrature::gauss_kronrod;
  auto density = [a](double t) { return std::pow(std::sin(t), -a); };
  // Cell [lo, hi] on the left half; the right half follows by symmetry.
  auto cell = [&](double lo, double hi) {
    if (lo > 0.0) return gauss_kronrod<double, 61>::integrate(density, lo, hi, 10, 1e-14);
    // t = u^{1/(1-a)} absorbs the t^{-a} singularity at 0.
    const double e = 1.0 / (1.0 - a);
    auto smooth = [a, e](double u) {
      if (u == 0.0) return e;
      const double t = std::pow(u, e);
      return e * std::pow(std::sin(t) / t, -a);
    };
    return gauss_kronrod<double, 61>::integrate(smooth, 0.0, std::pow(hi, 1.0 - a), 10, 1e-14);
  };
  for (int k = 0; k < n_theta; ++k) {
    const int mirror = std::min(k, n_theta - 1 - k);
    double lo = mirror * dtheta;
    double hi = (mirror + 1) * dtheta;
    if (mirror == 0) lo += basis.window;
    if (2 * mirror + 1 == n_theta) hi = 0.5 * kPi;  // middle cell of an odd grid
    basis.theta[k] = (k + 0.5) * dtheta;
    basis.theta_weight[k] = 2 * mirror + 1 == n_theta ? 2.0 * cell(lo, hi) : cell(lo, hi);
  }
  basis.mean_ZH = 0.0;
  for (double w : basis.theta_weight) basis.mean_ZH += w;

  basis.modes.resize(K, n_theta);
  basis.ray0.resize(K);
  basis.ray_pi.resize(K);
  basis.interior_var = Eigen::VectorXd::Zero(n_theta);
  basis.ray_var = 0.0;
  for (int n = 1; n <= K; ++n) {
    const double amp = std::sqrt(2.0 / n);
    basis.ray0[n - 1] = amp;
    basis.ray_pi[n - 1] = (n % 2 == 0) ? amp : -amp;
    basis.ray_var += 2.0 / n;
    for (int k = 0; k < n_theta; ++k) {
      const double c = std::cos(n * basis.theta[k]);
      basis.modes(n - 1, k) = amp * c;
      basis.interior_var[k] += 2.0 / n * c * c;
    }
  }
  return basis;
}

LateralSample sample_lateral(const LateralBasis& basis, double s_begin, std::size_t n_slices, double ds,
                             std::uint64_t seed, std::uint64_t stream, bool keep_field, std::size_t bulk_begin,
                             std::size_t bulk_end) {
  if (n_slices == 0 || !(ds > 0.0)) throw Error(ErrorCode::InvalidArgument, "lateral grid is empty");
  bulk_end = std::min(bulk_end, n_slices);
  bulk_begin = std::min(bulk_begin, bulk_end);
  const int K = basis.n_modes();
  const auto n_theta = static_cast<Eigen::Index>(basis.theta.size());
  const double gamma = basis.gamma;

  Eigen::VectorXd decay(K);
  Eigen::VectorXd innovation(K);
  for (int n = 1; n <= K; ++n) {
    decay[n - 1] = std::exp(-n * ds);
    innovation[n - 1] = std::sqrt(-std::expm1(-2.0 * n * ds));
  }

  RandomStream rng(seed, stream);
  Eigen::MatrixXd U(static_cast<Eigen::Index>(n_slices), K);
  Eigen::VectorXd u(K);
  rng.fill_normal({u.data(), static_cast<std::size_t>(K)});
  Eigen::VectorXd xi(K);
  for (std::size_t i = 0; i < n_slices; ++i) {
    if (i > 0) {
      rng.fill_normal({xi.data(), static_cast<std::size_t>(K)});
      u = decay.cwiseProduct(u) + innovation.cwiseProduct(xi);
    }
    U.row(static_cast<Eigen::Index>(i)) = u.transpose();
  }

  LateralSample out;
  out.s_begin = s_begin;
  out.ds = ds;
  out.bulk_begin = bulk_begin;
  out.bulk_end = bulk_end;
  out.ZH.assign(n_slices, 0.0);
  out.Zbdy.resize(n_slices);

  const Eigen::VectorXd y0 = U * basis.ray0;
  const Eigen::VectorXd ypi = U * basis.ray_pi;
  const double bdy_shift = 0.125 * gamma * gamma * basis.ray_var;
  for (std::size_t i = 0; i < n_slices; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.Zbdy[i] = std::exp(0.5 * gamma * y0[r] - bdy_shift) + std::exp(0.5 * gamma * ypi[r] - bdy_shift);
  }

  const auto nb = static_cast<Eigen::Index>(bulk_end - bulk_begin);
  Eigen::MatrixXd Y;
  if (nb > 0) {
    Y.noalias() = U.middleRows(static_cast<Eigen::Index>(bulk_begin), nb) * basis.modes;
    const Eigen::RowVectorXd shift = (0.5 * gamma * gamma) * basis.interior_var.transpose();
    const Eigen::Map<const Eigen::VectorXd> weight(basis.theta_weight.data(), n_theta);
    const Eigen::VectorXd zh = ((gamma * Y.array()).rowwise() - shift.array()).exp().matrix() * weight;
    for (Eigen::Index k = 0; k < nb; ++k) out.ZH[bulk_begin + static_cast<std::size_t>(k)] = zh[k];
  }

  if (keep_field) {
    out.Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_slices), n_theta + 2);
    const Eigen::MatrixXd full = U * basis.modes;
    out.Y.leftCols(n_theta) = full;
    out.Y.col(n_theta) = y0;
    out.Y.col(n_theta + 1) = ypi;
  }
  return out;
}

LateralSample sample_lateral(double gamma, double T, double ds, LateralOptions options, std::uint64_t seed,
                             std::uint64_t stream, bool keep_field) {
  check_grid(T, ds);
  const LateralBasis basis = make_lateral_basis(gamma, options);
  const auto half = static_cast<std::size_t>(std::llround(T / ds));
  return sample_lateral(basis, -static_cast<double>(half) * ds, 2 * half + 1, ds, seed, stream, keep_field);
}

IValues compute_I(const TwoSidedPath& path, const LateralSample& lateral, const LateralBasis& basis, double x,
                  double tolerance) {
  if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "cut-off x must be >= 0");
  return integrate(path, lateral, basis, x, tolerance, Parts::Both);
}

double default_horizon(double gamma, double t_max) {
  const double alpha = 2.0 / gamma - 0.5 * gamma;
  return std::max(30.0, 3.0 * std::log(std::max(t_max, 1.0)) / (gamma * alpha));
}

JointSample sample_joint(const LateralBasis& basis, const RadialConfig& config, std::uint64_t seed,
                         std::uint64_t replica) {
  const DriftSpec spec{basis.gamma};
  const double g = basis.gamma;
  const Path right = sample_conditioned_path(spec, config.T, config.ds, config.eps, seed,
                                             derive_stream(StreamDomain::PathDescent, replica));
  const Path left = sample_conditioned_path(spec, config.T, config.ds, config.eps, seed,
                                            derive_stream(StreamDomain::PathAscent, replica));
  const std::size_t right_len = active_length(right.values, 0.5 * g, config.log_cutoff);
  const std::size_t left_len = active_length(left.values, 0.5 * g, config.log_cutoff);
  const std::size_t right_bulk = active_length(right.values, g, config.log_cutoff);
  const std::size_t left_bulk = active_length(left.values, g, config.log_cutoff);

  JointSample out;
  out.path = williams_concatenate(0.0, trimmed(right, right_len), trimmed(left, left_len));
  const std::size_t offset = left_len - 1;
  const std::size_t n = offset + right_len;
  out.lateral = sample_lateral(basis, -static_cast<double>(offset) * config.ds, n, config.ds, seed,
                               derive_stream(StreamDomain::Lateral, replica), false, offset + 1 - left_bulk,
                               offset + right_bulk);
  return out;
}

IValues sample_I_infinity(const LateralBasis& basis, const RadialConfig& config, std::uint64_t seed,
                          std::uint64_t replica) {
  const JointSample joint = sample_joint(basis, config, seed, replica);
  return integrate(joint.path, joint.lateral, basis, std::numeric_limits<double>::infinity(), config.tolerance,
                   Parts::Both);
}

double radial_bulk_mass(const LateralBasis& basis, const RadialConfig& config, double rho, std::uint64_t seed,
                        std::uint64_t replica) {
  if (!(rho > 0.0 && rho < 1.0)) {
    std::ostringstream msg;
    msg << "rho=" << rho << " outside (0, 1): Var N_rho = -2 ln rho must be positive";
    throw Error(ErrorCode::InvalidRho, msg.str());
  }
  const DriftSpec spec{basis.gamma};
  const double g = basis.gamma;
  RandomStream normal_rng(seed, derive_stream(StreamDomain::SemicircleAverage, replica));
  const double N = std::sqrt(-2.0 * std::log(rho)) * normal_rng.normal();
  const double M = sample_max(spec, seed, replica);

  const Path right = sample_conditioned_path(spec, config.T, config.ds, config.eps, seed,
                                             derive_stream(StreamDomain::PathDescent, replica));
  const double left_T = config.T + 2.0 * M / spec.alpha();
  const Path left = sample_conditioned_path(spec, left_T, config.ds, config.eps, seed,
                                            derive_stream(StreamDomain::PathAscent, replica));
  const std::size_t right_len = active_length(right.values, g, config.log_cutoff);
  const auto [cut, fraction] = last_passage(left.values, M);
  (void)fraction;
  const std::size_t left_len = std::min(left.values.size(), cut + 2);

  const TwoSidedPath path = williams_concatenate(M, trimmed(right, right_len), trimmed(left, left_len));
  const std::size_t offset = left_len - 1;
  const std::size_t n = offset + right_len;
  const LateralSample lateral = sample_lateral(basis, -static_cast<double>(offset) * config.ds, n, config.ds, seed,
                                               derive_stream(StreamDomain::Lateral, replica));
  const IValues I = integrate(path, lateral, basis, M, config.tolerance, Parts::BulkOnly);
  return std::pow(rho, 2.0 - 0.5 * g * g) * std::exp(g * N + g * M) * I.IH;
}

}  // namespace gmclab::radial
