#include "gmclab/gmc.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "gmclab/error.hpp"

namespace gmclab::gmc {
namespace {

constexpr double kPi = std::numbers::pi;

// int_{lo}^{hi} u^{-c} du for 0 <= lo < hi.
double power_integral(double lo, double hi, double c) {
  if (c == 1.0) return std::log(hi / lo);
  return (std::pow(hi, 1.0 - c) - std::pow(lo, 1.0 - c)) / (1.0 - c);
}

// int_{lo}^{hi} |u|^{-c} du over a signed interval, with |u| < cut removed.
double abs_power_integral(double lo, double hi, double c, double cut) {
  double total = 0.0;
  if (hi > cut) total += power_integral(std::max(lo, cut), hi, c);
  if (lo < -cut) total += power_integral(std::max(-hi, cut), -lo, c);
  return total;
}

void check_region(const std::vector<std::size_t>& region, std::size_t limit, const char* what) {
  for (std::size_t index : region) {
    if (index >= limit) {
      std::ostringstream msg;
      msg << what << " index " << index << " out of range (" << limit << ")";
      throw Error(ErrorCode::RegionMismatch, msg.str());
    }
  }
}

void check_field(const FieldSample& field, const CovFactor& factor, const Grid& grid) {
  if (field.values.size() != grid.node_count() || factor.dim != grid.node_count()) {
    throw Error(ErrorCode::RegionMismatch, "field, factor and grid sizes disagree");
  }
}

// Ray from the origin in direction (c, s) against the box; returns [enter, exit], empty if enter >= exit.
std::pair<double, double> ray_box(double c, double s, double x0, double x1, double y0, double y1) {
  double enter = 0.0;
  double exit = std::numeric_limits<double>::infinity();
  auto slab = [&](double dir, double lo, double hi) {
    if (std::abs(dir) < 1e-300) {
      if (lo > 0.0 || hi < 0.0) exit = -1.0;
      return;
    }
    double t1 = lo / dir;
    double t2 = hi / dir;
    if (t1 > t2) std::swap(t1, t2);
    enter = std::max(enter, t1);
    exit = std::min(exit, t2);
  };
  slab(c, x0, x1);
  slab(s, y0, y1);
  return {enter, exit};
}

}  // namespace

void GmcParams::validate() const {
  if (!(gamma > 0.0 && gamma < 2.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidArgument, "r must be positive");
}

CellSet all_cells(const Grid& grid) {
  CellSet cells(grid.bulk_count());
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  return cells;
}

SegmentSet all_segments(const Grid& grid) {
  SegmentSet segments(grid.bdy_count());
  for (std::size_t j = 0; j < segments.size(); ++j) segments[j] = j;
  return segments;
}

CellSet half_disc_cells(const Grid& grid, double v, double rho) {
  CellSet cells;
  for (std::size_t i = 0; i < grid.bulk_count(); ++i) {
    const auto& p = grid.bulk_centers[i];
    if (std::hypot(p.x - v, p.y) < rho) cells.push_back(i);
  }
  return cells;
}

SegmentSet interval_segments(const Grid& grid, double v, double rho) {
  SegmentSet segments;
  for (std::size_t j = 0; j < grid.bdy_count(); ++j) {
    if (std::abs(grid.bdy_centers[j] - v) <= rho) segments.push_back(j);
  }
  return segments;
}

namespace {
std::vector<std::size_t> complement_of(std::size_t n, const std::vector<std::size_t>& set) {
  std::vector<char> in(n, 0);
  for (std::size_t i : set) {
    if (i >= n) throw Error(ErrorCode::RegionMismatch, "complement: index out of range");
    in[i] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in[i]) out.push_back(i);
  }
  return out;
}
}  // namespace

CellSet complement_cells(const Grid& grid, const CellSet& cells) { return complement_of(grid.bulk_count(), cells); }
SegmentSet complement_segments(const Grid& grid, const SegmentSet& segments) {
  return complement_of(grid.bdy_count(), segments);
}

Weights cell_weights(const Grid& grid, const GmcParams& params) {
  params.validate();
  const double a = params.bulk_power();
  const double h = grid.cell_side;
  Weights weights;
  weights.bulk.resize(grid.bulk_count());
  const double y_cut = a >= 1.0 ? 0.5 * h : 0.0;
  if (a >= 1.0 && grid.bulk_count() > 0) weights.windows.push_back({"bulk y-window", y_cut});
  for (std::size_t i = 0; i < grid.bulk_count(); ++i) {
    const int row = grid.bulk_row(i);
    const double y0 = std::max(row * h, y_cut);
    weights.bulk[i] = h * power_integral(y0, (row + 1) * h, a);
  }
  weights.bdy.assign(grid.bdy_count(), grid.seg_len);
  return weights;
}

double polar_box_integral(double x0, double x1, double y0, double y1, double a, double b, double disc_window,
                          double tolerance) {
  if (!(x0 < x1 && 0.0 <= y0 && y0 < y1)) throw Error(ErrorCode::InvalidArgument, "polar_box_integral: bad box");
  const double e = 2.0 - a - b;  // radial exponent after the Jacobian
  const bool origin_on_edge = y0 == 0.0 && x0 <= 0.0 && x1 >= 0.0;
  if (origin_on_edge && e <= 0.0 && disc_window <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "polar_box_integral: non-integrable singularity without window");
  }
  if (y0 == 0.0 && a >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "polar_box_integral: y^-a not integrable at y = 0");
  }

  std::vector<double> cuts;
  const std::array<std::array<double, 2>, 4> corners{{{x0, y0}, {x1, y0}, {x0, y1}, {x1, y1}}};
  for (const auto& c : corners) {
    if (c[0] == 0.0 && c[1] == 0.0) continue;
    cuts.push_back(std::atan2(c[1], c[0]));
  }
  if (origin_on_edge) {
    if (x1 > 0.0) cuts.push_back(0.0);
    if (x0 < 0.0) cuts.push_back(kPi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (cuts.size() < 2) return 0.0;

  auto radial = [&](double lo, double hi) {
    if (e == 0.0) return std::log(hi / lo);
    return (std::pow(hi, e) - std::pow(lo, e)) / e;
  };
  auto angular = [&](double phi) {
    const double s = std::sin(phi);
    auto [enter, exit] = ray_box(std::cos(phi), s, x0, x1, y0, y1);
    enter = std::max(enter, disc_window);
    if (!(exit > enter)) return 0.0;
    if (enter == 0.0 && e <= 0.0) return 0.0;  // unreachable given the checks above
    return std::pow(s, -a) * radial(enter, exit);
  };

  boost::math::quadrature::tanh_sinh<double> integrator(12);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] < 1e-15) continue;
    total += integrator.integrate(angular, cuts[k], cuts[k + 1], tolerance);
  }
  return total;
}

Weights localized_weights(const Grid& grid, const GmcParams& params, double v, LocalizedOptions options) {
  params.validate();
  if (!(std::abs(v) < grid.r)) throw Error(ErrorCode::InvalidArgument, "localization point must satisfy |v| < r");
  const double a = params.bulk_power();
  const double b = params.gamma * params.gamma;
  const double h = grid.cell_side;
  Weights weights;

  const double y_cut = a >= 1.0 ? 0.5 * h : 0.0;
  const double disc_cut = (2.0 - a - b) <= 0.0 ? 0.5 * h : 0.0;
  if (grid.bulk_count() > 0) {
    if (y_cut > 0.0) weights.windows.push_back({"bulk y-window", y_cut});
    if (disc_cut > 0.0) weights.windows.push_back({"bulk half-disc window around v", disc_cut});
  }
  weights.bulk.resize(grid.bulk_count());
  for (std::size_t i = 0; i < grid.bulk_count(); ++i) {
    const int row = grid.bulk_row(i);
    const int col = static_cast<int>(i) - row * grid.n_bulk;
    const double x0 = -grid.r + col * h - v;
    const double y0 = std::max(row * h, y_cut);
    weights.bulk[i] = polar_box_integral(x0, x0 + h, y0, (row + 1) * h, a, b, disc_cut, options.tolerance);
  }

  const double c = a;  // boundary weight |w - v|^{-gamma^2/2}
  const double seg_cut = c >= 1.0 ? 0.5 * grid.seg_len : 0.0;
  if (seg_cut > 0.0) weights.windows.push_back({"boundary window around v", seg_cut});
  weights.bdy.resize(grid.bdy_count());
  for (std::size_t j = 0; j < grid.bdy_count(); ++j) {
    const double lo = grid.bdy_centers[j] - 0.5 * grid.seg_len - v;
    weights.bdy[j] = abs_power_integral(lo, lo + grid.seg_len, c, seg_cut);
  }
  return weights;
}

Exponentials exponentials(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                          const GmcParams& params) {
  check_field(field, factor, grid);
  params.validate();
  const double g = params.gamma;
  const std::size_t nb = grid.bulk_count();
  Exponentials out;
  out.bulk.resize(static_cast<Eigen::Index>(nb));
  out.bdy.resize(static_cast<Eigen::Index>(grid.bdy_count()));
  for (std::size_t i = 0; i < nb; ++i) {
    out.bulk[i] = std::exp(g * field.values[i] - 0.5 * g * g * factor.diag_var[i]);
  }
  for (std::size_t j = 0; j < grid.bdy_count(); ++j) {
    const std::size_t k = nb + j;
    out.bdy[j] = std::exp(0.5 * g * field.values[k] - 0.125 * g * g * factor.diag_var[k]);
  }
  return out;
}

BatchExponentials batch_exponentials(const Eigen::MatrixXd& fields, const CovFactor& factor, const Grid& grid,
                                     const GmcParams& params) {
  if (static_cast<std::size_t>(fields.rows()) != grid.node_count() || factor.dim != grid.node_count()) {
    throw Error(ErrorCode::RegionMismatch, "field block does not match the grid");
  }
  params.validate();
  const double g = params.gamma;
  const auto nb = static_cast<Eigen::Index>(grid.bulk_count());
  const auto nd = static_cast<Eigen::Index>(grid.bdy_count());
  BatchExponentials out;
  const Eigen::ArrayXd bulk_shift = 0.5 * g * g * factor.diag_var.head(nb).array();
  const Eigen::ArrayXd bdy_shift = 0.125 * g * g * factor.diag_var.tail(nd).array();
  out.bulk = ((g * fields.topRows(nb).array()).colwise() - bulk_shift).exp().matrix();
  out.bdy = ((0.5 * g * fields.bottomRows(nd).array()).colwise() - bdy_shift).exp().matrix();
  return out;
}

double weighted_sum(const std::vector<double>& weights, const Eigen::Ref<const Eigen::VectorXd>& values,
                    const std::vector<std::size_t>& region) {
  check_region(region, std::min(weights.size(), static_cast<std::size_t>(values.size())), "region");
  double total = 0.0;
  for (std::size_t i : region) total += weights[i] * values[static_cast<Eigen::Index>(i)];
  return total;
}

double bulk_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                 const CellSet& region) {
  check_region(region, grid.bulk_count(), "bulk cell");
  return weighted_sum(cell_weights(grid, params).bulk, exponentials(field, factor, grid, params).bulk, region);
}

double bdy_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                const SegmentSet& interval) {
  check_region(interval, grid.bdy_count(), "segment");
  return weighted_sum(cell_weights(grid, params).bdy, exponentials(field, factor, grid, params).bdy, interval);
}

double localized_bulk_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                           const GmcParams& params, double v, const CellSet& region) {
  check_region(region, grid.bulk_count(), "bulk cell");
  return weighted_sum(localized_weights(grid, params, v).bulk, exponentials(field, factor, grid, params).bulk,
                      region);
}

double localized_bdy_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                          const GmcParams& params, double v, const SegmentSet& interval) {
  check_region(interval, grid.bdy_count(), "segment");
  return weighted_sum(localized_weights(grid, params, v).bdy, exponentials(field, factor, grid, params).bdy,
                      interval);
}

MeasureSample measure(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                      const CellSet& region, const SegmentSet& interval, std::optional<double> v) {
  check_region(region, grid.bulk_count(), "bulk cell");
  check_region(interval, grid.bdy_count(), "segment");
  const Exponentials ex = exponentials(field, factor, grid, params);
  const Weights plain = cell_weights(grid, params);
  MeasureSample out;
  out.bulk_mass = weighted_sum(plain.bulk, ex.bulk, region);
  out.bdy_mass = weighted_sum(plain.bdy, ex.bdy, interval);
  if (v) {
    const Weights local = localized_weights(grid, params, *v);
    out.loc_bulk = weighted_sum(local.bulk, ex.bulk, region);
    out.loc_bdy = weighted_sum(local.bdy, ex.bdy, interval);
    out.v = v;
  }
  return out;
}

}  // namespace gmclab::gmc
