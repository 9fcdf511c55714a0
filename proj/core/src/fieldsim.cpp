#include "gmclab/fieldsim.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gmclab/error.hpp"
#include "gmclab/rng.hpp"

namespace gmclab::fieldsim {
namespace {

constexpr double kPi = std::numbers::pi;

// E[ln|U - U'|] for U, U' uniform in the unit square.
const double kUnitSquareLogMean = -25.0 / 12.0 + kPi / 3.0 + std::log(2.0) / 3.0;

// -1/2 E[ln(u^2 + v^2)] with u triangular on [-1, 1] and v = y + y' for y, y'
// uniform on [k, k + 1], i.e. v triangular on [2k, 2k + 2] peaked at 2k + 1.
double reflected_log_average(int k) {
  using boost::math::quadrature::gauss_kronrod;
  const double lo = 2.0 * k;
  auto density_v = [lo](double v) { return 1.0 - std::abs(v - (lo + 1.0)); };
  auto inner = [&](double u) {
    auto f = [&](double v) { return density_v(v) * std::log(u * u + v * v); };
    return gauss_kronrod<double, 31>::integrate(f, lo, lo + 1.0, 12, 1e-12) +
           gauss_kronrod<double, 31>::integrate(f, lo + 1.0, lo + 2.0, 12, 1e-12);
  };
  // u enters through u^2 only: fold the triangle onto [0, 1] with density 2(1 - u).
  auto outer = [&](double u) { return 2.0 * (1.0 - u) * inner(u); };
  const double mean_log = gauss_kronrod<double, 31>::integrate(outer, 0.0, 1.0, 12, 1e-11);
  return -0.5 * mean_log;
}

double perturbation_at(const KernelSpec& kernel, HalfPlanePoint a, HalfPlanePoint b) {
  const auto* g = kernel.perturbation();
  return g ? (*g)(a, b) : 0.0;
}

void require_field_kernel(const Grid& grid, const KernelSpec& kernel) {
  switch (kernel.kind()) {
    case kernels::KernelKind::ExactScalingNeumann:
    case kernels::KernelKind::Perturbed:
      return;
    case kernels::KernelKind::BoundaryRestriction:
      if (grid.bulk_count() != 0) {
        throw Error(ErrorCode::InvalidArgument, "boundary restriction kernel needs a boundary-only grid");
      }
      return;
    case kernels::KernelKind::DirichletPart:
      if (grid.bdy_count() != 0) {
        throw Error(ErrorCode::InvalidArgument, "Dirichlet part vanishes on the boundary; use a bulk-only grid");
      }
      return;
    case kernels::KernelKind::Lateral:
      break;
  }
  throw Error(ErrorCode::InvalidArgument, "kernel kind cannot drive a half-plane grid field");
}

// Cell-averaged self-covariance per bulk row (depends on the row only), then per segment.
std::vector<double> row_self_covariances(const Grid& grid, const KernelSpec& kernel) {
  std::vector<double> rows(static_cast<std::size_t>(grid.bulk_count() > 0 ? grid.n_bulk : 0));
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const double direct = square_self_log_average(grid.cell_side);
    const double full = bulk_self_covariance(grid.cell_side, static_cast<int>(row));
    // Dirichlet part subtracts the reflected term instead of adding it.
    rows[row] = kernel.kind() == kernels::KernelKind::DirichletPart ? direct - (full - direct) : full;
  }
  return rows;
}

}  // namespace

HalfPlanePoint Grid::node(std::size_t i) const {
  if (i < bulk_count()) return bulk_centers[i];
  return {bdy_centers.at(i - bulk_count()), 0.0};
}

std::size_t Grid::segment_of(double x) const {
  const double position = std::floor((x + r) / seg_len);
  return static_cast<std::size_t>(std::clamp(position, 0.0, static_cast<double>(n_bdy - 1)));
}

Grid build_grid(double r, int n_bulk, int n_bdy) {
  const auto total = static_cast<long long>(n_bulk) * n_bulk + n_bdy;
  if (!(r > 0.0) || !std::isfinite(r) || n_bulk < 0 || n_bdy < 1 || total < 2 ||
      total > static_cast<long long>(kMaxNodes)) {
    std::ostringstream msg;
    msg << "build_grid(r=" << r << ", n_bulk=" << n_bulk << ", n_bdy=" << n_bdy << ")";
    throw Error(ErrorCode::InvalidResolution, msg.str());
  }
  Grid grid;
  grid.r = r;
  grid.n_bulk = n_bulk;
  grid.n_bdy = n_bdy;
  grid.cell_side = n_bulk > 0 ? 2.0 * r / n_bulk : 0.0;
  grid.cell_area = grid.cell_side * grid.cell_side;
  grid.seg_len = 2.0 * r / n_bdy;
  grid.bulk_centers.reserve(static_cast<std::size_t>(n_bulk) * n_bulk);
  for (int row = 0; row < n_bulk; ++row) {
    for (int col = 0; col < n_bulk; ++col) {
      grid.bulk_centers.push_back({-r + (col + 0.5) * grid.cell_side, (row + 0.5) * grid.cell_side});
    }
  }
  grid.bdy_centers.reserve(n_bdy);
  for (int j = 0; j < n_bdy; ++j) grid.bdy_centers.push_back(-r + (j + 0.5) * grid.seg_len);
  return grid;
}

double square_self_log_average(double side) { return -std::log(side) - kUnitSquareLogMean; }

double bulk_self_covariance(double side, int row) {
  return square_self_log_average(side) - std::log(side) + reflected_log_average(row);
}

double segment_self_covariance(double length) { return -2.0 * (std::log(length) - 1.5); }

CovFactor build_cov(const Grid& grid, const KernelSpec& kernel, bool coupling_bdy) {
  require_field_kernel(grid, kernel);
  const std::size_t n = grid.node_count();
  Eigen::MatrixXd cov(n, n);
  const std::vector<double> rows = row_self_covariances(grid, kernel);
  const double segment_self = segment_self_covariance(grid.seg_len);
  for (std::size_t i = 0; i < n; ++i) {
    const HalfPlanePoint p = grid.node(i);
    const double base = i < grid.bulk_count() ? rows[static_cast<std::size_t>(grid.bulk_row(i))] : segment_self;
    cov(i, i) = base + perturbation_at(kernel, p, p);
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool cross = (i < grid.bulk_count()) != (j < grid.bulk_count());
      const double value = (cross && !coupling_bdy) ? 0.0 : kernel(grid.node(i), grid.node(j));
      cov(i, j) = value;
      cov(j, i) = value;
    }
  }

  CovFactor factor;
  factor.dim = n;
  const double base_jitter = 1e-12 * cov.trace() / static_cast<double>(n);
  const double max_entry = cov.cwiseAbs().maxCoeff();
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    Eigen::MatrixXd trial = cov;
    trial.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      factor.covariance = std::move(trial);
      factor.lower = llt.matrixL();
      factor.diag_var = factor.covariance.diagonal();
      factor.jitter_used = jitter;
      factor.retries = attempt;
      return factor;
    }
    jitter = attempt == 0 ? base_jitter : jitter * 10.0;
    if (jitter > 1e-6 * max_entry) break;
  }
  std::ostringstream msg;
  msg << "covariance of dimension " << n << " not positive definite after jitter " << jitter;
  throw Error(ErrorCode::NotPositiveDefinite, msg.str());
}

FieldSample sample_field(const CovFactor& factor, std::uint64_t seed, std::uint64_t stream) {
  RandomStream rng(seed, stream);
  Eigen::VectorXd z(factor.dim);
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const Eigen::VectorXd x = factor.lower.triangularView<Eigen::Lower>() * z;
  FieldSample sample;
  sample.values.assign(x.data(), x.data() + x.size());
  sample.seed = seed;
  sample.stream = stream;
  return sample;
}

Eigen::MatrixXd sample_fields(const CovFactor& factor, std::uint64_t seed, std::uint64_t first_stream,
                              std::size_t count) {
  Eigen::MatrixXd z(factor.dim, static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    RandomStream rng(seed, first_stream + k);
    rng.fill_normal({z.col(static_cast<Eigen::Index>(k)).data(), factor.dim});
  }
  return factor.lower.triangularView<Eigen::Lower>() * z;
}

std::vector<double> shift_vector(const CovFactor& factor, const Grid& grid, const KernelSpec& kernel, double v) {
  if (!(v > -grid.r && v < grid.r)) {
    std::ostringstream msg;
    msg << "localization point v=" << v << " outside (-r, r) with r=" << grid.r;
    throw Error(ErrorCode::SingularShift, msg.str());
  }
  if (factor.dim != grid.node_count()) throw Error(ErrorCode::RegionMismatch, "factor does not match grid");
  const std::size_t segment = grid.segment_of(v);
  const std::size_t owner = grid.bdy_node(segment);
  const double centre = grid.bdy_centers[segment];
  std::vector<double> shift(factor.dim);
  if (std::abs(v - centre) <= 1e-12 * grid.seg_len) {
    for (std::size_t i = 0; i < factor.dim; ++i) shift[i] = factor.covariance(i, owner);
    return shift;
  }
  const HalfPlanePoint anchor{v, 0.0};
  for (std::size_t i = 0; i < factor.dim; ++i) {
    if (i == owner) {
      // Segment average of -2 ln|w - v| over [a, b] containing v.
      const double a = centre - 0.5 * grid.seg_len - v;
      const double b = centre + 0.5 * grid.seg_len - v;
      auto primitive = [](double u) { return u == 0.0 ? 0.0 : u * std::log(std::abs(u)) - u; };
      shift[i] = -2.0 * (primitive(b) - primitive(a)) / grid.seg_len +
                 perturbation_at(kernel, grid.node(i), anchor);
    } else {
      shift[i] = kernel(grid.node(i), anchor);
    }
  }
  return shift;
}

FieldSample girsanov_shift(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                           const KernelSpec& kernel, double v, double charge) {
  if (field.values.size() != factor.dim) throw Error(ErrorCode::RegionMismatch, "field does not match factor");
  std::vector<double> drift = shift_vector(factor, grid, kernel, v);
  FieldSample shifted = field;
  for (std::size_t i = 0; i < drift.size(); ++i) {
    drift[i] *= charge;
    shifted.values[i] += drift[i];
  }
  if (shifted.shift) {
    for (std::size_t i = 0; i < drift.size(); ++i) (*shifted.shift)[i] += drift[i];
  } else {
    shifted.shift = std::move(drift);
  }
  return shifted;
}

}  // namespace gmclab::fieldsim
