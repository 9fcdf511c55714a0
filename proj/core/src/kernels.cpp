#include "gmclab/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "gmclab/error.hpp"

namespace gmclab::kernels {
namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

void require_half_plane(HalfPlanePoint p) {
  if (!(p.y >= 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") is not in the closed upper half-plane";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

[[noreturn]] void diagonal(const char* where) {
  throw Error(ErrorCode::DiagonalSingularity, std::string(where) + ": coincident arguments");
}

Complex polar_point(double t, double theta) { return std::polar(std::exp(-t), theta); }

// Offset-grid rule for int_0^pi int_0^pi K(e^{-s}e^{i a}, e^{-t}e^{i b}) da db.
// Folding the two log terms gives a full-circle integral in b, and the
// integrand is even and 2pi-periodic in a, so equispaced rules converge
// geometrically. Outer nodes sit on k*h, inner nodes on (k+1/2)*h, so the
// equal-radius diagonal is never sampled; its offset-rule bias is exactly
// -h*ln2 per outer node and is added back.
double semicircle_rule(double s, double t, int n) {
  const double h = kPi / n;
  const double r1 = std::exp(-s);
  const double r2 = std::exp(-t);
  const bool equal_radii = std::abs(s - t) < 1e-14;
  double outer = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double a = k * h;
    const Complex z = std::polar(r1, a);
    double inner = 0.0;
    for (int j = 0; j < n; ++j) {
      const double b = (j + 0.5) * h;
      const Complex w = std::polar(r2, b);
      inner -= std::log(std::abs(z - w) * std::abs(z - std::conj(w)));
    }
    inner *= h;
    if (equal_radii) inner += h * std::log(2.0);
    const double weight = (k == 0 || k == n) ? 0.5 : 1.0;
    outer += weight * inner;
  }
  return outer * h / (kPi * kPi);
}

}  // namespace

double eval_neumann(HalfPlanePoint z, HalfPlanePoint w) {
  require_half_plane(z);
  require_half_plane(w);
  const double dx = z.x - w.x;
  const double direct = std::hypot(dx, z.y - w.y);
  if (direct == 0.0) diagonal("eval_neumann");
  const double reflected = std::hypot(dx, z.y + w.y);
  return -std::log(direct * reflected);
}

double eval_dirichlet(HalfPlanePoint z, HalfPlanePoint w) {
  require_half_plane(z);
  require_half_plane(w);
  const double dx = z.x - w.x;
  const double direct = std::hypot(dx, z.y - w.y);
  if (direct == 0.0) diagonal("eval_dirichlet");
  const double reflected = std::hypot(dx, z.y + w.y);
  return -std::log(direct / reflected);
}

double eval_boundary(double x, double y) {
  if (x == y) diagonal("eval_boundary");
  return -2.0 * std::log(std::abs(x - y));
}

double eval_lateral(double t, double theta, double t2, double theta2) {
  if (theta < 0.0 || theta > kPi || theta2 < 0.0 || theta2 > kPi) {
    throw Error(ErrorCode::InvalidArgument, "eval_lateral: angles must lie in [0, pi]");
  }
  const Complex z = polar_point(t, theta);
  const Complex w = polar_point(t2, theta2);
  const double direct = std::abs(z - w);
  const double reflected = std::abs(z - std::conj(w));
  if (direct == 0.0 || reflected == 0.0) diagonal("eval_lateral");
  // Work with the log of the larger radius directly: ln(max(e^{-t}, e^{-t2})^2) = -2 min(t, t2).
  return -2.0 * std::min(t, t2) - std::log(direct * reflected);
}

double semicircle_avg_cov(double s, double t) {
  if (s < 0.0 || t < 0.0) throw Error(ErrorCode::InvalidArgument, "semicircle_avg_cov: negative time");
  return 2.0 * std::min(s, t);
}

double quadrature_cov(double s, double t, int n_nodes, double tolerance) {
  if (!(s > 0.0) || !(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "quadrature_cov: s, t must be > 0");
  if (n_nodes < 4) throw Error(ErrorCode::InvalidArgument, "quadrature_cov: need at least 4 nodes");
  const double fine = semicircle_rule(s, t, n_nodes);
  const double coarse = semicircle_rule(s, t, n_nodes / 2);
  if (std::abs(fine - coarse) > tolerance) {
    std::ostringstream msg;
    msg << "quadrature_cov(" << s << ", " << t << ", " << n_nodes << "): refinements differ by "
        << std::abs(fine - coarse) << " > " << tolerance;
    throw Error(ErrorCode::QuadratureUnstable, msg.str());
  }
  return fine;
}

double lateral_angular_average(double t, double t2, int n_nodes) {
  if (t == t2) throw Error(ErrorCode::DiagonalSingularity, "lateral_angular_average: equal radii");
  const double h = kPi / n_nodes;
  double total = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      total += eval_lateral(t, (i + 0.5) * h, t2, (j + 0.5) * h);
    }
  }
  return total * h * h / (kPi * kPi);
}

double eval_perturbed(HalfPlanePoint z, HalfPlanePoint w, const Perturbation& g) {
  return eval_neumann(z, w) + g(z, w);
}

KernelSpec KernelSpec::exact_scaling_neumann() { return KernelSpec(KernelKind::ExactScalingNeumann); }
KernelSpec KernelSpec::dirichlet_part() { return KernelSpec(KernelKind::DirichletPart); }
KernelSpec KernelSpec::boundary_restriction() { return KernelSpec(KernelKind::BoundaryRestriction); }
KernelSpec KernelSpec::lateral() { return KernelSpec(KernelKind::Lateral); }

KernelSpec KernelSpec::perturbed(Perturbation g) {
  if (!g) throw Error(ErrorCode::InvalidArgument, "perturbed kernel needs a g");
  static constexpr std::array<HalfPlanePoint, 6> probes{{
      {0.0, 0.0}, {0.3, 0.1}, {-0.7, 0.4}, {1.1, 0.0}, {-0.2, 1.3}, {0.05, 0.6}}};
  for (const auto& a : probes) {
    for (const auto& b : probes) {
      const double ab = g(a, b);
      const double ba = g(b, a);
      if (std::abs(ab - ba) > 1e-12 * (1.0 + std::abs(ab))) {
        throw Error(ErrorCode::InvalidArgument, "perturbation g is not symmetric");
      }
    }
  }
  return KernelSpec(KernelKind::Perturbed, std::make_shared<const Perturbation>(std::move(g)));
}

double KernelSpec::operator()(HalfPlanePoint z, HalfPlanePoint w) const {
  switch (kind_) {
    case KernelKind::ExactScalingNeumann:
      return eval_neumann(z, w);
    case KernelKind::DirichletPart:
      return eval_dirichlet(z, w);
    case KernelKind::BoundaryRestriction:
      if (z.y != 0.0 || w.y != 0.0) {
        throw Error(ErrorCode::InvalidArgument, "boundary restriction evaluated off the boundary");
      }
      return eval_boundary(z.x, w.x);
    case KernelKind::Lateral: {
      require_half_plane(z);
      require_half_plane(w);
      if (std::hypot(z.x, z.y) == 0.0 || std::hypot(w.x, w.y) == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "lateral kernel undefined at the origin");
      }
      return eval_lateral(-std::log(std::hypot(z.x, z.y)), std::atan2(z.y, z.x),
                          -std::log(std::hypot(w.x, w.y)), std::atan2(w.y, w.x));
    }
    case KernelKind::Perturbed:
      return eval_perturbed(z, w, *g_);
  }
  return 0.0;
}

}  // namespace gmclab::kernels
