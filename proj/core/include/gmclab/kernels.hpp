#pragma once

#include <functional>
#include <memory>

namespace gmclab::kernels {

/// Point of the closed upper half-plane; boundary points have y == 0.
struct HalfPlanePoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const HalfPlanePoint&, const HalfPlanePoint&) = default;
};

/// Symmetric bounded correction g(z, w) added to the exact-scaling kernel.
using Perturbation = std::function<double(HalfPlanePoint, HalfPlanePoint)>;

enum class KernelKind { ExactScalingNeumann, DirichletPart, BoundaryRestriction, Lateral, Perturbed };

/// -ln(|z - w| |z - conj(w)|).
double eval_neumann(HalfPlanePoint z, HalfPlanePoint w);

/// -ln(|z - w| / |conj(z) - w|); vanishes when either point is on the boundary.
double eval_dirichlet(HalfPlanePoint z, HalfPlanePoint w);

/// -2 ln|x - y| for boundary points.
double eval_boundary(double x, double y);

/// Covariance of the lateral field Y^H in log-polar coordinates z = e^{-t} e^{i theta}.
double eval_lateral(double t, double theta, double t2, double theta2);

/// Covariance of the unnormalized semicircle average A_t = (1/pi) int_0^pi X(e^{-t} e^{i theta}) dtheta.
double semicircle_avg_cov(double s, double t);

/// Double quadrature of eval_neumann over the semicircles of radii e^{-s} and e^{-t},
/// divided by pi^2. Throws QuadratureUnstable when the n and n/2 rules differ by more
/// than `tolerance`.
double quadrature_cov(double s, double t, int n_nodes, double tolerance = 1e-6);

/// (1/pi^2) times the double angular integral of eval_lateral at fixed (t, t2).
double lateral_angular_average(double t, double t2, int n_nodes);

double eval_perturbed(HalfPlanePoint z, HalfPlanePoint w, const Perturbation& g);

/// Which covariance to use together with how to evaluate it. Kernels carry no gamma.
class KernelSpec {
 public:
  static KernelSpec exact_scaling_neumann();
  static KernelSpec dirichlet_part();
  static KernelSpec boundary_restriction();
  static KernelSpec lateral();
  /// Rejects a g that is visibly asymmetric on a fixed set of probe pairs.
  static KernelSpec perturbed(Perturbation g);

  KernelKind kind() const noexcept { return kind_; }
  /// Null unless kind() == Perturbed.
  const Perturbation* perturbation() const noexcept { return g_.get(); }

  double operator()(HalfPlanePoint z, HalfPlanePoint w) const;

 private:
  explicit KernelSpec(KernelKind kind, std::shared_ptr<const Perturbation> g = nullptr)
      : kind_(kind), g_(std::move(g)) {}

  KernelKind kind_;
  std::shared_ptr<const Perturbation> g_;
};

}  // namespace gmclab::kernels
