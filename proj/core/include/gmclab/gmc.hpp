#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gmclab/fieldsim.hpp"

namespace gmclab::gmc {

using fieldsim::CovFactor;
using fieldsim::FieldSample;
using fieldsim::Grid;

struct GmcParams {
  double gamma = 1.0;
  double r = 0.5;

  /// InvalidArgument unless 0 < gamma < 2 and r > 0.
  void validate() const;
  double bulk_power() const noexcept { return 0.5 * gamma * gamma; }  ///< exponent of Im(z)^{-.}
};

/// Bulk cell indices (node numbering of the grid).
using CellSet = std::vector<std::size_t>;
/// Boundary segment indices, 0 .. n_bdy - 1.
using SegmentSet = std::vector<std::size_t>;

CellSet all_cells(const Grid& grid);
SegmentSet all_segments(const Grid& grid);
/// Cells whose centre lies in the half-disc |z - v| < rho.
CellSet half_disc_cells(const Grid& grid, double v, double rho);
/// Segments whose centre lies in [v - rho, v + rho].
SegmentSet interval_segments(const Grid& grid, double v, double rho);
CellSet complement_cells(const Grid& grid, const CellSet& cells);
SegmentSet complement_segments(const Grid& grid, const SegmentSet& segments);

/// Region of the integrand removed because the weight is not integrable there.
struct WeightWindow {
  std::string what;
  double half_width = 0.0;
};

struct Weights {
  std::vector<double> bulk;  ///< per bulk cell
  std::vector<double> bdy;   ///< per boundary segment
  std::vector<WeightWindow> windows;
};

/// w_i = integral of y^{-gamma^2/2} over cell i, seg_len per segment.
/// For gamma^2/2 >= 1 the bottom row integrates over y >= h/2 only.
Weights cell_weights(const Grid& grid, const GmcParams& params);

struct LocalizedOptions {
  double tolerance = 1e-9;  ///< relative tolerance of the angular quadrature
};

/// Weights of the localized measures: each bulk cell integrates
/// |z - v|^{-gamma^2} y^{-gamma^2/2}, each segment |w - v|^{-gamma^2/2}.
/// Non-integrable singularities are cut out by windows listed in the result.
Weights localized_weights(const Grid& grid, const GmcParams& params, double v, LocalizedOptions options = {});

/// Integral of |z|^{-b} y^{-a} over the box [x0, x1] x [y0, y1] (y0 >= 0),
/// excluding |z| < disc_window. Polar coordinates around the origin.
double polar_box_integral(double x0, double x1, double y0, double y1, double a, double b, double disc_window,
                          double tolerance);

/// exp(gamma X_i - gamma^2/2 var_i) per bulk cell and exp(gamma/2 X_j - gamma^2/8 var_j) per segment.
struct Exponentials {
  Eigen::VectorXd bulk;
  Eigen::VectorXd bdy;
};
Exponentials exponentials(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                          const GmcParams& params);

/// Same for a block of fields stored as columns (rows follow the node order).
struct BatchExponentials {
  Eigen::MatrixXd bulk;
  Eigen::MatrixXd bdy;
};
BatchExponentials batch_exponentials(const Eigen::MatrixXd& fields, const CovFactor& factor, const Grid& grid,
                                     const GmcParams& params);

double bulk_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                 const CellSet& region);
double bdy_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                const SegmentSet& interval);
double localized_bulk_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                           const GmcParams& params, double v, const CellSet& region);
double localized_bdy_mass(const FieldSample& field, const CovFactor& factor, const Grid& grid,
                          const GmcParams& params, double v, const SegmentSet& interval);

/// sum over region of weights[i] * values[i]; RegionMismatch on a bad index.
double weighted_sum(const std::vector<double>& weights, const Eigen::Ref<const Eigen::VectorXd>& values,
                    const std::vector<std::size_t>& region);

struct MeasureSample {
  double bulk_mass = 0.0;
  double bdy_mass = 0.0;
  std::optional<double> loc_bulk;
  std::optional<double> loc_bdy;
  std::optional<double> v;
};

/// Plain masses of the region/interval, plus localized ones when v is given.
MeasureSample measure(const FieldSample& field, const CovFactor& factor, const Grid& grid, const GmcParams& params,
                      const CellSet& region, const SegmentSet& interval, std::optional<double> v = std::nullopt);

}  // namespace gmclab::gmc
