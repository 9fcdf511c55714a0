#include "gmclab/tailest.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "gmclab/error.hpp"
#include "gmclab/parallel.hpp"
#include "gmclab/rng.hpp"

namespace gmclab::tailest {
namespace {

Estimate mean_estimate(std::span<const double> values) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  e.value = mean;
  e.stderr = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return e;
}

void require_window(double t_min, double t_max) {
  if (!(t_min > 0.0) || !(t_max > t_min)) throw Error(ErrorCode::DegenerateWindow, "fit window must satisfy 0 < t_min < t_max");
}

struct WlsSums {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  double x_min = 0, x_max = 0;
};

WlsSums collect(std::span<const SurvivalPoint> curve, double t_min, double t_max) {
  WlsSums s;
  for (const auto& p : curve) {
    if (p.t < t_min || p.t > t_max || p.boundary || !(p.phat > 0.0 && p.phat < 1.0) || !(p.stderr > 0.0)) continue;
    const double w = (p.phat * p.phat) / (p.stderr * p.stderr);
    const double x = std::log(p.t);
    const double y = std::log(p.phat);
    s.sw += w;
    s.sx += w * x;
    s.sy += w * y;
    s.sxx += w * x * x;
    s.sxy += w * x * y;
    if (s.n == 0) s.x_min = s.x_max = p.t;
    s.x_min = std::min(s.x_min, p.t);
    s.x_max = std::max(s.x_max, p.t);
    ++s.n;
  }
  return s;
}

void require_points(const WlsSums& s) {
  if (s.n < 8) {
    std::ostringstream msg;
    msg << "only " << s.n << " usable survival points in the window (need 8)";
    throw Error(ErrorCode::DegenerateWindow, msg.str());
  }
}

}  // namespace

std::vector<SurvivalPoint> survival_curve(std::span<const double> samples, std::span<const double> ts) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "survival_curve: no samples");
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (!(ts[k] > ts[k - 1])) throw Error(ErrorCode::InvalidArgument, "survival_curve: ts must be increasing");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<SurvivalPoint> curve;
  curve.reserve(ts.size());
  for (double t : ts) {
    const auto above = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    SurvivalPoint p;
    p.t = t;
    p.phat = above / n;
    p.stderr = std::sqrt(p.phat * (1.0 - p.phat) / n);
    p.boundary = above == 0.0 || above == n;
    curve.push_back(p);
  }
  return curve;
}

TailFit fit_tail(std::span<const SurvivalPoint> curve, double t_min, double t_max) {
  require_window(t_min, t_max);
  const WlsSums s = collect(curve, t_min, t_max);
  require_points(s);
  const double det = s.sw * s.sxx - s.sx * s.sx;
  if (!(det > 0.0)) throw Error(ErrorCode::DegenerateWindow, "fit window has no spread in ln t");
  const double slope = (s.sw * s.sxy - s.sx * s.sy) / det;
  const double intercept = (s.sy - slope * s.sx) / s.sw;
  TailFit fit;
  fit.method = FitMethod::LogLogWLS;
  fit.exponent = -slope;
  fit.constant = std::exp(intercept);
  fit.stderr_exponent = std::sqrt(s.sw / det);
  fit.stderr_constant = fit.constant * std::sqrt(s.sxx / det);
  fit.t_min = s.x_min;
  fit.t_max = s.x_max;
  fit.n_points = s.n;
  return fit;
}

TailFit fit_constant(std::span<const SurvivalPoint> curve, double t_min, double t_max, double exponent) {
  require_window(t_min, t_max);
  const WlsSums s = collect(curve, t_min, t_max);
  require_points(s);
  // ln phat + exponent ln t = ln C
  const double intercept = (s.sy + exponent * s.sx) / s.sw;
  TailFit fit;
  fit.method = FitMethod::LogLogWLS;
  fit.exponent = exponent;
  fit.constant = std::exp(intercept);
  fit.stderr_exponent = 0.0;
  fit.stderr_constant = fit.constant / std::sqrt(s.sw);
  fit.t_min = s.x_min;
  fit.t_max = s.x_max;
  fit.n_points = s.n;
  return fit;
}

TailFit fit_tail_hill(std::span<const double> samples, std::size_t k) {
  if (samples.size() < 1000 || k < 2 || k >= samples.size()) {
    throw Error(ErrorCode::DegenerateWindow, "Hill estimator needs >= 1000 samples and 2 <= k < n");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(), std::greater<>());
  const double threshold = sorted[k];
  if (!(threshold > 0.0)) throw Error(ErrorCode::DegenerateWindow, "Hill threshold must be positive");
  double sum = 0.0;
  double top = threshold;
  for (std::size_t i = 0; i < k; ++i) {
    sum += std::log(sorted[i] / threshold);
    top = std::max(top, sorted[i]);
  }
  const double hill = sum / static_cast<double>(k);
  TailFit fit;
  fit.method = FitMethod::Hill;
  fit.exponent = 1.0 / hill;
  fit.stderr_exponent = fit.exponent / std::sqrt(static_cast<double>(k));
  fit.constant = static_cast<double>(k) / static_cast<double>(samples.size()) * std::pow(threshold, fit.exponent);
  fit.stderr_constant = fit.constant / std::sqrt(static_cast<double>(k));
  fit.t_min = threshold;
  fit.t_max = top;
  fit.n_points = static_cast<int>(k);
  return fit;
}

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "quantile of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw Error(ErrorCode::InvalidArgument, "log_grid needs 0 < lo < hi, n >= 2");
  std::vector<double> out(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = lo * std::exp(step * static_cast<double>(k));
  out.back() = hi;
  return out;
}

GridModel make_grid_model(double gamma, double r, int n_bulk, int n_bdy, fieldsim::KernelSpec kernel) {
  GridModel model;
  model.params = {gamma, r};
  model.params.validate();
  model.grid = fieldsim::build_grid(r, n_bulk, n_bdy);
  model.kernel = std::move(kernel);
  model.factor = fieldsim::build_cov(model.grid, model.kernel);
  model.plain = gmc::cell_weights(model.grid, model.params);
  return model;
}

void for_each_field_block(const GridModel& model, std::size_t N, std::uint64_t seed, std::size_t threads,
                          const std::function<void(std::size_t, const gmc::BatchExponentials&)>& body) {
  const std::size_t blocks = (N + kFieldBlock - 1) / kFieldBlock;
  parallel_for(blocks, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const std::size_t first = b * kFieldBlock;
      const std::size_t count = std::min(kFieldBlock, N - first);
      const Eigen::MatrixXd fields =
          fieldsim::sample_fields(model.factor, seed, derive_stream(StreamDomain::Field, first), count);
      body(first, gmc::batch_exponentials(fields, model.factor, model.grid, model.params));
    }
  });
}

LocalizedSamples sample_localized(const GridModel& model, std::size_t N, std::uint64_t seed, std::size_t threads) {
  if (N == 0) throw Error(ErrorCode::EmptySample, "need at least one replica");
  const auto& grid = model.grid;
  const auto& C = model.factor.covariance;
  const double g2 = model.params.gamma * model.params.gamma;
  const auto nb = static_cast<Eigen::Index>(grid.bulk_count());
  const auto nd = static_cast<Eigen::Index>(grid.bdy_count());

  Eigen::MatrixXd Wb(nd, nb);
  Eigen::MatrixXd Wd(nd, nd);
  for (Eigen::Index j = 0; j < nd; ++j) {
    const Eigen::Index node = nb + j;
    for (Eigen::Index i = 0; i < nb; ++i) Wb(j, i) = model.plain.bulk[i] * std::exp(0.5 * g2 * C(i, node));
    for (Eigen::Index k = 0; k < nd; ++k) Wd(j, k) = grid.seg_len * std::exp(0.25 * g2 * C(nb + k, node));
  }
  const Eigen::Map<const Eigen::VectorXd> w(model.plain.bulk.data(), nb);

  LocalizedSamples out;
  out.seg_len = grid.seg_len;
  out.total_length = 2.0 * grid.r;
  out.plain_bulk.resize(N);
  out.plain_bdy.resize(N);
  out.loc_bulk.resize(nd, static_cast<Eigen::Index>(N));
  out.inv_loc_bdy.resize(nd, static_cast<Eigen::Index>(N));
  for_each_field_block(model, N, seed, threads, [&](std::size_t first, const gmc::BatchExponentials& ex) {
    const auto cols = ex.bulk.cols();
    const auto c0 = static_cast<Eigen::Index>(first);
    out.loc_bulk.middleCols(c0, cols).noalias() = Wb * ex.bulk;
    out.inv_loc_bdy.middleCols(c0, cols) = (Wd * ex.bdy).cwiseInverse();
    const Eigen::VectorXd pb = ex.bulk.transpose() * w;
    const Eigen::VectorXd pd = grid.seg_len * ex.bdy.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < cols; ++k) {
      out.plain_bulk[first + static_cast<std::size_t>(k)] = pb[k];
      out.plain_bdy[first + static_cast<std::size_t>(k)] = pd[k];
    }
  });
  return out;
}

Estimate localized_estimate(const LocalizedSamples& samples, double t) {
  const auto N = samples.loc_bulk.cols();
  std::vector<double> y(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < samples.loc_bulk.rows(); ++j) {
      if (samples.loc_bulk(j, n) > t) acc += samples.inv_loc_bdy(j, n);
    }
    y[static_cast<std::size_t>(n)] = samples.seg_len * acc;
  }
  return mean_estimate(y);
}

std::size_t localized_exceedances(const LocalizedSamples& samples, double t) {
  return static_cast<std::size_t>((samples.loc_bulk.array() > t).count());
}

std::vector<SurvivalPoint> localized_curve(const LocalizedSamples& samples, std::span<const double> ts) {
  std::vector<SurvivalPoint> curve;
  curve.reserve(ts.size());
  for (double t : ts) {
    const Estimate e = localized_estimate(samples, t);
    SurvivalPoint p;
    p.t = t;
    p.phat = e.value;
    p.stderr = e.stderr;
    p.boundary = e.value <= 0.0 || e.stderr <= 0.0;
    curve.push_back(p);
  }
  return curve;
}

Estimate localized_tail_estimator(const GridModel& model, double t, std::size_t N, std::uint64_t seed,
                                  std::size_t threads) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
  return localized_estimate(sample_localized(model, N, seed, threads), t);
}

FitWindow default_window(const LocalizedSamples& samples, std::span<const double> ts, std::size_t min_exceedances) {
  FitWindow window;
  window.t_min = quantile(samples.plain_bulk, 0.95);
  window.t_max = window.t_min;
  for (double t : ts) {
    if (localized_exceedances(samples, t) >= min_exceedances) window.t_max = std::max(window.t_max, t);
  }
  if (!(window.t_max > window.t_min)) throw Error(ErrorCode::DegenerateWindow, "no exceedances above the 95th percentile");
  return window;
}

std::vector<StabilityPoint> stability_series(std::span<const SurvivalPoint> curve, FitWindow window,
                                             double width_factor, std::size_t steps) {
  std::vector<StabilityPoint> series;
  const double last_start = window.t_max / width_factor;
  if (!(width_factor > 1.0) || steps < 1 || !(last_start > window.t_min)) return series;
  const std::vector<double> starts = steps == 1 ? std::vector<double>{window.t_min}
                                                : log_grid(window.t_min, last_start, steps);
  for (double start : starts) {
    try {
      const TailFit fit = fit_tail(curve, start, start * width_factor);
      series.push_back({start, start * width_factor, fit.exponent, fit.stderr_exponent});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateWindow) throw;
    }
  }
  return series;
}

Plateau find_plateau(std::span<const StabilityPoint> series, double target, double spread, std::size_t min_run) {
  Plateau best;
  for (std::size_t i = 0; i < series.size(); ++i) {
    double lo = series[i].exponent;
    double hi = lo;
    double se = 0.0;
    for (std::size_t j = i; j < series.size(); ++j) {
      lo = std::min(lo, series[j].exponent);
      hi = std::max(hi, series[j].exponent);
      se = std::max(se, series[j].stderr);
      if (hi - lo > spread) break;
      const std::size_t len = j - i + 1;
      const bool contains = target >= lo - 2.0 * se && target <= hi + 2.0 * se;
      if (len >= min_run && contains && len > best.length) best = {true, i, len, lo, hi};
    }
  }
  return best;
}

GirsanovComparison girsanov_comparison(const GridModel& model, const std::function<double(double)>& f,
                                       std::size_t N, std::uint64_t seed, std::size_t threads) {
  const double length = 2.0 * model.grid.r;
  // Independent draws for the two estimators.
  const LocalizedSamples a = sample_localized(model, N, seed, threads);
  const LocalizedSamples b = sample_localized(model, N, seed ^ 0x9E3779B97F4A7C15ULL, threads);
  std::vector<double> reweighted(N);
  std::vector<double> shifted(N);
  for (std::size_t n = 0; n < N; ++n) {
    reweighted[n] = f(a.plain_bulk[n]) * a.plain_bdy[n] / length;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < b.loc_bulk.rows(); ++j) acc += f(b.loc_bulk(j, static_cast<Eigen::Index>(n)));
    shifted[n] = b.seg_len * acc / length;
  }
  GirsanovComparison out;
  out.reweighted = mean_estimate(reweighted);
  out.shifted = mean_estimate(shifted);
  const double se = std::hypot(out.reweighted.stderr, out.shifted.stderr);
  out.z_score = se > 0.0 ? (out.reweighted.value - out.shifted.value) / se : 0.0;
  return out;
}

RenormalizationCheck renormalization_means(const GridModel& model, std::size_t N, std::uint64_t seed,
                                           std::size_t threads) {
  std::vector<double> bulk(N);
  std::vector<double> bdy(N);
  const auto nb = static_cast<Eigen::Index>(model.grid.bulk_count());
  const Eigen::Map<const Eigen::VectorXd> w(model.plain.bulk.data(), nb);
  for_each_field_block(model, N, seed, threads, [&](std::size_t first, const gmc::BatchExponentials& ex) {
    const Eigen::VectorXd pb = ex.bulk.transpose() * w;
    const Eigen::VectorXd pd = model.grid.seg_len * ex.bdy.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < pb.size(); ++k) {
      bulk[first + static_cast<std::size_t>(k)] = pb[k];
      bdy[first + static_cast<std::size_t>(k)] = pd[k];
    }
  });
  RenormalizationCheck out;
  out.bulk = mean_estimate(bulk);
  out.bdy = mean_estimate(bdy);
  out.bulk_target = w.sum();
  out.bdy_target = 2.0 * model.grid.r;
  return out;
}

LocalityMasses locality_masses(const GridModel& model, double v, double rho, std::size_t N, std::uint64_t seed,
                               std::size_t threads) {
  const double r = model.grid.r;
  if (!(rho > 0.0) || !(2.0 * rho < std::min(r - v, v + r))) {
    std::ostringstream msg;
    msg << "need 2 rho < min(r - v, v + r); got rho=" << rho << ", v=" << v << ", r=" << r;
    throw Error(ErrorCode::GeometryViolation, msg.str());
  }
  const gmc::Weights loc = gmc::localized_weights(model.grid, model.params, v);
  const auto nb = static_cast<Eigen::Index>(model.grid.bulk_count());
  const auto nd = static_cast<Eigen::Index>(model.grid.bdy_count());
  Eigen::VectorXd full_b = Eigen::Map<const Eigen::VectorXd>(loc.bulk.data(), nb);
  Eigen::VectorXd full_d = Eigen::Map<const Eigen::VectorXd>(loc.bdy.data(), nd);
  Eigen::VectorXd local_b = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd local_d = Eigen::VectorXd::Zero(nd);
  for (std::size_t i : gmc::half_disc_cells(model.grid, v, rho)) local_b[static_cast<Eigen::Index>(i)] = loc.bulk[i];
  for (std::size_t j : gmc::interval_segments(model.grid, v, rho)) local_d[static_cast<Eigen::Index>(j)] = loc.bdy[j];

  LocalityMasses out;
  out.full_bulk.resize(N);
  out.full_bdy.resize(N);
  out.local_bulk.resize(N);
  out.local_bdy.resize(N);
  for_each_field_block(model, N, seed, threads, [&](std::size_t first, const gmc::BatchExponentials& ex) {
    const Eigen::VectorXd fb = ex.bulk.transpose() * full_b;
    const Eigen::VectorXd fd = ex.bdy.transpose() * full_d;
    const Eigen::VectorXd lb = ex.bulk.transpose() * local_b;
    const Eigen::VectorXd ld = ex.bdy.transpose() * local_d;
    for (Eigen::Index k = 0; k < fb.size(); ++k) {
      const std::size_t n = first + static_cast<std::size_t>(k);
      out.full_bulk[n] = fb[k];
      out.full_bdy[n] = fd[k];
      out.local_bulk[n] = lb[k];
      out.local_bdy[n] = ld[k];
    }
  });
  return out;
}

std::vector<LocalityGap> locality_gap(const LocalityMasses& masses, std::span<const double> ts) {
  const std::size_t N = masses.full_bulk.size();
  std::vector<LocalityGap> out;
  std::vector<double> gap(N);
  std::vector<double> local(N);
  for (double t : ts) {
    for (std::size_t n = 0; n < N; ++n) {
      const double full_term = masses.full_bulk[n] > t ? 1.0 / masses.full_bdy[n] : 0.0;
      const double local_term = masses.local_bulk[n] > t ? 1.0 / masses.local_bdy[n] : 0.0;
      gap[n] = full_term - local_term;
      local[n] = local_term;
    }
    out.push_back({t, mean_estimate(gap), mean_estimate(local)});
  }
  return out;
}

std::vector<LocalityGap> locality_gap(const GridModel& model, double v, double rho, std::span<const double> ts,
                                      std::size_t N, std::uint64_t seed, std::size_t threads) {
  return locality_gap(locality_masses(model, v, rho, N, seed, threads), ts);
}

double radial_prefactor(double gamma, double r) { return 2.0 * r * (1.0 - 0.25 * gamma * gamma); }

ConstantEstimate summarize_heavy(std::span<const double> values, double scale, std::uint64_t seed,
                                 const ConstantOptions& options) {
  if (values.empty()) throw Error(ErrorCode::EmptySample, "no integrand values");
  const Estimate plain = mean_estimate(values);
  ConstantEstimate out;
  out.n = values.size();
  out.mean_integrand = plain.value;
  out.constant = scale * plain.value;
  out.stderr = scale * plain.stderr;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto drop = static_cast<std::size_t>(std::floor(options.trim * static_cast<double>(sorted.size())));
  const std::size_t keep = sorted.size() - std::min(drop, sorted.size() - 1);
  out.trimmed_constant = scale * std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep), 0.0) /
                         static_cast<double>(keep);

  if (options.bootstrap > 0) {
    RandomStream rng(seed, derive_stream(StreamDomain::Bootstrap, 0));
    const std::size_t n = values.size();
    std::vector<double> means(options.bootstrap);
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += values[static_cast<std::size_t>(rng.next_u64() % n)];
      means[b] = scale * acc / static_cast<double>(n);
    }
    const double tail = 0.5 * (1.0 - options.confidence);
    out.ci_low = quantile(means, tail);
    out.ci_high = quantile(means, 1.0 - tail);
  } else {
    out.ci_low = out.ci_high = out.constant;
  }
  return out;
}

RadialISamples sample_radial_integrals(double gamma, const radial::RadialConfig& config, std::span<const double> xs,
                                       std::size_t N, std::uint64_t seed, std::size_t threads) {
  const radial::LateralBasis basis = radial::make_lateral_basis(gamma, config.lateral);
  RadialISamples out;
  out.xs.assign(xs.begin(), xs.end());
  out.IH.assign(xs.size(), std::vector<double>(N, std::numeric_limits<double>::quiet_NaN()));
  out.Ibdy.assign(xs.size(), std::vector<double>(N, std::numeric_limits<double>::quiet_NaN()));
  std::vector<char> failed(N, 0);
  parallel_for(N, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      radial::RadialConfig attempt = config;
      for (int tries = 0;; ++tries) {
        try {
          const radial::JointSample joint = radial::sample_joint(basis, attempt, seed, n);
          for (std::size_t k = 0; k < xs.size(); ++k) {
            const radial::IValues I = radial::compute_I(joint.path, joint.lateral, basis, xs[k], attempt.tolerance);
            out.IH[k][n] = I.IH;
            out.Ibdy[k][n] = I.Ibdy;
          }
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::TruncationTooShort) throw;
          if (tries == 3) {
            failed[n] = 1;
            break;
          }
          attempt.T *= 2.0;
          attempt.log_cutoff *= 1.5;
        }
      }
    }
  });
  out.truncation_failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  return out;
}

ConstantEstimate estimate_constant_radial(double gamma, double r, const radial::RadialConfig& config, std::size_t N,
                                          std::uint64_t seed, std::size_t threads, const ConstantOptions& options) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "r must be positive");
  if (N == 0) throw Error(ErrorCode::EmptySample, "need at least one replica");
  const double scale = radial_prefactor(gamma, r);
  std::vector<double> values;
  std::size_t failures = 0;
  if (options.integrand_override) {
    values.resize(N);
    for (std::size_t n = 0; n < N; ++n) values[n] = options.integrand_override(n);
  } else {
    const double inf = std::numeric_limits<double>::infinity();
    const RadialISamples I = sample_radial_integrals(gamma, config, std::span<const double>(&inf, 1), N, seed, threads);
    failures = I.truncation_failures;
    values.reserve(N);
    const double power = 2.0 / (gamma * gamma);
    for (std::size_t n = 0; n < N; ++n) {
      if (std::isnan(I.IH[0][n])) continue;
      values.push_back(std::pow(I.IH[0][n], power) / I.Ibdy[0][n]);
    }
  }
  ConstantEstimate out = summarize_heavy(values, scale, seed, options);
  out.truncation_failures = failures;
  return out;
}

bool finite_predicted(double gamma, double p, double q) {
  const double g2 = gamma * gamma;
  return p < std::min(2.0 / g2 + 0.5 * q, 4.0 / g2);
}

QuotientMomentEstimate quotient_moment(std::span<const double> bulk, std::span<const double> bdy, double gamma,
                                       double p, double q) {
  if (bulk.size() != bdy.size()) throw Error(ErrorCode::InvalidArgument, "bulk and boundary samples differ in size");
  if (p < 0.0 || q < 0.0) throw Error(ErrorCode::InvalidArgument, "p and q must be >= 0");
  std::vector<double> values;
  values.reserve(bulk.size());
  for (std::size_t n = 0; n < bulk.size(); ++n) {
    if (std::isnan(bulk[n]) || std::isnan(bdy[n])) continue;
    values.push_back(std::pow(bulk[n], p) / std::pow(bdy[n], q));
  }
  if (values.empty()) throw Error(ErrorCode::EmptySample, "no usable samples");
  const Estimate e = mean_estimate(values);
  QuotientMomentEstimate out;
  out.p = p;
  out.q = q;
  out.estimate = e.value;
  out.stderr = e.stderr;
  out.n = e.n;
  out.finite_predicted = finite_predicted(gamma, p, q);
  double acc = 0.0;
  std::size_t next = 1;
  for (std::size_t n = 0; n < values.size(); ++n) {
    acc += values[n];
    if (n + 1 == next) {
      out.running_mean.push_back(acc / static_cast<double>(n + 1));
      next *= 2;
    }
  }
  return out;
}

LineFit loglog_fit(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr) {
  if (x.size() != y.size() || x.size() != y_stderr.size()) throw Error(ErrorCode::InvalidArgument, "size mismatch");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0) || !std::isfinite(y[k])) continue;
    const double rel = y_stderr[k] / y[k];
    const double w = rel > 0.0 ? 1.0 / (rel * rel) : 1.0;
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sw += w;
    sx += w * lx;
    sy += w * ly;
    sxx += w * lx * lx;
    sxy += w * lx * ly;
    ++used;
  }
  if (used < 2) throw Error(ErrorCode::DegenerateWindow, "need two points for a slope");
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw Error(ErrorCode::DegenerateWindow, "no spread in x");
  LineFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / sw;
  fit.slope_stderr = std::sqrt(sw / det);
  return fit;
}

ScalingSweep quotient_scaling_sweep(const GridModel& model, double v, std::span<const double> rhos, double p, double q,
                                    std::size_t N, std::uint64_t seed, std::size_t threads) {
  const auto& grid = model.grid;
  const gmc::Weights loc = gmc::localized_weights(grid, model.params, v);
  const auto nb = static_cast<Eigen::Index>(grid.bulk_count());
  const auto nd = static_cast<Eigen::Index>(grid.bdy_count());
  const auto R = static_cast<Eigen::Index>(rhos.size());
  // Columns: region weights per rho (bulk) and per rho (boundary), then complements.
  Eigen::MatrixXd Wb = Eigen::MatrixXd::Zero(nb, 2 * R);
  Eigen::MatrixXd Wd = Eigen::MatrixXd::Zero(nd, 2 * R);
  for (Eigen::Index k = 0; k < R; ++k) {
    const gmc::CellSet cells = gmc::half_disc_cells(grid, v, rhos[k]);
    const gmc::SegmentSet segs = gmc::interval_segments(grid, v, rhos[k]);
    for (Eigen::Index i = 0; i < nb; ++i) Wb(i, R + k) = loc.bulk[i];
    for (Eigen::Index j = 0; j < nd; ++j) Wd(j, R + k) = loc.bdy[j];
    for (std::size_t i : cells) {
      Wb(static_cast<Eigen::Index>(i), k) = loc.bulk[i];
      Wb(static_cast<Eigen::Index>(i), R + k) = 0.0;
    }
    for (std::size_t j : segs) {
      Wd(static_cast<Eigen::Index>(j), k) = loc.bdy[j];
      Wd(static_cast<Eigen::Index>(j), R + k) = 0.0;
    }
  }
  Eigen::MatrixXd bulk(2 * R, static_cast<Eigen::Index>(N));
  Eigen::MatrixXd bdy(2 * R, static_cast<Eigen::Index>(N));
  for_each_field_block(model, N, seed, threads, [&](std::size_t first, const gmc::BatchExponentials& ex) {
    const auto c0 = static_cast<Eigen::Index>(first);
    bulk.middleCols(c0, ex.bulk.cols()).noalias() = Wb.transpose() * ex.bulk;
    bdy.middleCols(c0, ex.bdy.cols()).noalias() = Wd.transpose() * ex.bdy;
  });

  ScalingSweep out;
  out.rhos.assign(rhos.begin(), rhos.end());
  out.zeta = zeta_tilde(p, q, model.params.gamma);
  std::vector<double> est, se, cest, cse, crho;
  for (Eigen::Index k = 0; k < 2 * R; ++k) {
    std::vector<double> b(static_cast<std::size_t>(N));
    std::vector<double> d(static_cast<std::size_t>(N));
    Eigen::VectorXd::Map(b.data(), static_cast<Eigen::Index>(N)) = bulk.row(k).transpose();
    Eigen::VectorXd::Map(d.data(), static_cast<Eigen::Index>(N)) = bdy.row(k).transpose();
    const bool empty_bdy = q > 0.0 && bdy.row(k).maxCoeff() <= 0.0;
    QuotientMomentEstimate e;
    if (empty_bdy) {
      e.p = p;
      e.q = q;
      e.estimate = std::numeric_limits<double>::quiet_NaN();
      e.stderr = std::numeric_limits<double>::quiet_NaN();
      e.finite_predicted = finite_predicted(model.params.gamma, p, q);
    } else {
      e = quotient_moment(b, d, model.params.gamma, p, q);
    }
    if (k < R) {
      out.scaling.push_back(e);
      est.push_back(e.estimate);
      se.push_back(e.stderr);
    } else {
      out.complement.push_back(e);
      if (std::isfinite(e.estimate)) {
        cest.push_back(e.estimate);
        cse.push_back(e.stderr);
        crho.push_back(rhos[k - R]);
      }
    }
  }
  const LineFit fit = loglog_fit(rhos, est, se);
  out.slope = fit.slope;
  out.slope_stderr = fit.slope_stderr;
  out.complement_slope = crho.size() >= 2 ? loglog_fit(crho, cest, cse).slope : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::vector<double> localized_region_masses(const GridModel& model, double v, double rho, std::size_t N,
                                            std::uint64_t seed, std::size_t threads) {
  const gmc::Weights loc = gmc::localized_weights(model.grid, model.params, v);
  const auto nb = static_cast<Eigen::Index>(model.grid.bulk_count());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(nb);
  for (std::size_t i : gmc::half_disc_cells(model.grid, v, rho)) w[static_cast<Eigen::Index>(i)] = loc.bulk[i];
  std::vector<double> out(N);
  for_each_field_block(model, N, seed, threads, [&](std::size_t first, const gmc::BatchExponentials& ex) {
    const Eigen::VectorXd m = ex.bulk.transpose() * w;
    for (Eigen::Index k = 0; k < m.size(); ++k) out[first + static_cast<std::size_t>(k)] = m[k];
  });
  return out;
}

double zeta_tilde(double p, double q, double gamma) {
  const double u = p - 0.5 * q;
  const double g2 = gamma * gamma;
  return (2.0 - 0.5 * g2) * u - g2 * u * u;
}

FeasibilitySystem parse_system(std::string_view name) {
  std::string digits;
  std::string letters;
  for (char c : name) {
    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    else if (std::isalpha(static_cast<unsigned char>(c))) letters.push_back(static_cast<char>(std::tolower(c)));
    else if (c != '.' && c != '(' && c != ')' && c != ' ') digits = "x";
  }
  if ((letters.empty() || letters == "eq") && digits == "16") return FeasibilitySystem::Eq16;
  if ((letters.empty() || letters == "eq") && digits == "20") return FeasibilitySystem::Eq20;
  throw Error(ErrorCode::InvalidArgument, "unknown feasibility system '" + std::string(name) + "'");
}

std::string_view to_string(FeasibilitySystem system) {
  return system == FeasibilitySystem::Eq16 ? "Eq16" : "Eq20";
}

double feasibility_slack(double gamma, const FeasibleParams& w) {
  const double T = 2.0 / (gamma * gamma);
  std::vector<double> slack{w.p - T, T + w.dp - w.p, w.delta, w.dp, w.eta, 1.0 - w.eta};
  if (w.system == FeasibilitySystem::Eq16) {
    slack.push_back(w.eta - w.delta);
    slack.push_back(w.p * (1.0 - w.eta) - T - w.delta);
  } else {
    slack.push_back(T + 0.5 - w.p);
    slack.push_back(2.0 * T - w.p);  // 4 / gamma^2
    slack.push_back(w.p * (1.0 - w.eta) - T * (1.0 - w.eta) - w.delta);
    slack.push_back(w.eta * (T + 0.5) - T - w.delta);
  }
  return *std::min_element(slack.begin(), slack.end());
}

bool check_feasible(double gamma, const FeasibleParams& params, double min_slack) {
  return feasibility_slack(gamma, params) >= min_slack;
}

FeasibleParams feasible_params(double gamma, FeasibilitySystem system) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  const double T = 2.0 / (gamma * gamma);
  FeasibleParams w;
  w.system = system;
  w.p = T * (1.0 + 1e-3);
  const double gap = w.p - T;
  w.dp = 2.0 * gap;
  if (system == FeasibilitySystem::Eq16) {
    w.eta = gap / (2.0 * w.p);
    w.delta = 0.5 * std::min(w.eta, 0.5 * gap);
  } else {
    w.eta = 0.5 * (T / (T + 0.5) + 1.0);
    w.delta = 0.5 * std::min(gap * (1.0 - w.eta), w.eta * (T + 0.5) - T);
  }
  w.verified = check_feasible(gamma, w);
  if (!w.verified) {
    std::ostringstream msg;
    msg << "no witness for " << to_string(system) << " at gamma=" << gamma << " (slack " << feasibility_slack(gamma, w)
        << ")";
    throw Error(ErrorCode::Infeasible, msg.str());
  }
  return w;
}

double perturbed_constant_factor(const std::function<double(double)>& g_diag, double r, double gamma,
                                 double tolerance) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "r must be positive");
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  const double power = 2.0 / (gamma * gamma) - 1.0;
  auto f = [&](double v) { return std::exp(power * g_diag(v)); };
  double error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -r, r, 15, tolerance * 1e-2, &error);
  if (!std::isfinite(value) || error > tolerance * std::max(1.0, std::abs(value))) {
    std::ostringstream msg;
    msg << "quadrature error estimate " << error << " above tolerance " << tolerance;
    throw Error(ErrorCode::QuadratureUnstable, msg.str());
  }
  return value;
}

}  // namespace gmclab::tailest
