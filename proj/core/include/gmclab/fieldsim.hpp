#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gmclab/kernels.hpp"

namespace gmclab::fieldsim {

using kernels::HalfPlanePoint;
using kernels::KernelSpec;

/// Dense factorization is refused above this many nodes.
inline constexpr std::size_t kMaxNodes = 4096;

/// Uniform tiling of the Carleson cube Q_r = [-r, r] x [0, 2r] plus a
/// segmentation of I_r = [-r, r]. Node order: bulk cells row-major from the
/// bottom row, then boundary segments left to right.
struct Grid {
  double r = 0.0;
  int n_bulk = 0;
  int n_bdy = 0;
  std::vector<HalfPlanePoint> bulk_centers;
  std::vector<double> bdy_centers;
  double cell_side = 0.0;
  double cell_area = 0.0;
  double seg_len = 0.0;

  std::size_t bulk_count() const noexcept { return bulk_centers.size(); }
  std::size_t bdy_count() const noexcept { return bdy_centers.size(); }
  std::size_t node_count() const noexcept { return bulk_count() + bdy_count(); }
  std::size_t bdy_node(std::size_t segment) const noexcept { return bulk_count() + segment; }
  int bulk_row(std::size_t cell) const noexcept { return static_cast<int>(cell) / n_bulk; }
  HalfPlanePoint node(std::size_t i) const;
  /// Index of the boundary segment containing x (clamped to the interval).
  std::size_t segment_of(double x) const;
};

/// Throws InvalidResolution unless r > 0, n_bulk >= 0, n_bdy >= 1, at least
/// two nodes in total and no more than kMaxNodes.
Grid build_grid(double r, int n_bulk, int n_bdy);

struct CovFactor {
  std::size_t dim = 0;
  Eigen::MatrixXd covariance;  ///< symmetrized, jitter included
  Eigen::MatrixXd lower;       ///< lower * lower^T == covariance
  Eigen::VectorXd diag_var;    ///< diagonal of `covariance`
  double jitter_used = 0.0;
  int retries = 0;
};

/// -<ln|z - w|> for z, w independent uniform in a square of side h.
double square_self_log_average(double side);

/// Cell-averaged self-covariance of the exact-scaling kernel for the bulk cell
/// of side h whose bottom edge sits at height row * h.
double bulk_self_covariance(double side, int row);

/// Cell-averaged self-covariance -2 <ln|x - y|> on a segment of length l.
double segment_self_covariance(double length);

/// Off-diagonal entries are the kernel at node centres, diagonal entries are
/// cell averages. With coupling_bdy == false the bulk/boundary cross blocks
/// are zeroed. Jitter starts at 1e-12 * trace / dim and grows x10 per retry
/// (at most 6 retries); NotPositiveDefinite when that still fails.
CovFactor build_cov(const Grid& grid, const KernelSpec& kernel, bool coupling_bdy = true);

struct FieldSample {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::optional<std::vector<double>> shift;
};

/// values = lower * z with z standard normal from RandomStream(seed, stream).
FieldSample sample_field(const CovFactor& factor, std::uint64_t seed, std::uint64_t stream = 0);

/// Column k holds the field drawn from stream first_stream + k.
/// Batched through a triangular matrix product, so it matches sample_field
/// only up to floating-point summation order.
Eigen::MatrixXd sample_fields(const CovFactor& factor, std::uint64_t seed, std::uint64_t first_stream,
                              std::size_t count);

/// Unit-charge drift K(node_i, (v, 0)) underlying `factor`. When v is the
/// centre of a boundary segment the covariance column of that node is used
/// (its diagonal entry is the cell average), otherwise the segment containing
/// v gets the segment average of the kernel against v.
std::vector<double> shift_vector(const CovFactor& factor, const Grid& grid, const KernelSpec& kernel, double v);

/// Returns field + charge * shift_vector(v). SingularShift unless -r < v < r.
FieldSample girsanov_shift(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                           const KernelSpec& kernel, double v, double charge);

}  // namespace gmclab::fieldsim
