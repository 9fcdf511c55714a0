#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gmclab/error.hpp"
#include "gmclab/kernels.hpp"

namespace k = gmclab::kernels;
using gmclab::Error;
using gmclab::ErrorCode;
using std::numbers::pi;

namespace {
ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no gmclab::Error thrown";
  return ErrorCode::InvalidArgument;
}
}  // namespace

TEST(Neumann, Values) {
  EXPECT_NEAR(k::eval_neumann({0, 1}, {0, 2}), -std::log(3.0), 1e-15);
  EXPECT_NEAR(k::eval_neumann({1, 0}, {-1, 0}), -2.0 * std::log(2.0), 1e-15);
  EXPECT_EQ(code_of([] { k::eval_neumann({0, 1}, {0, 1}); }), ErrorCode::DiagonalSingularity);
  EXPECT_EQ(code_of([] { k::eval_neumann({0, -1}, {0, 1}); }), ErrorCode::InvalidArgument);
}

TEST(Neumann, SplitsIntoDirichletAndReflection) {
  const k::HalfPlanePoint z{0.3, 0.7}, w{-0.4, 0.2};
  const double reflected = -2.0 * std::log(std::hypot(z.x - w.x, z.y + w.y));
  EXPECT_NEAR(k::eval_neumann(z, w), k::eval_dirichlet(z, w) + reflected, 1e-14);
  EXPECT_DOUBLE_EQ(k::eval_dirichlet({0.2, 0.0}, w), 0.0);
  EXPECT_NEAR(k::eval_neumann({0.2, 0}, {0.9, 0}), k::eval_boundary(0.2, 0.9), 1e-14);
}

TEST(Boundary, Values) {
  EXPECT_DOUBLE_EQ(k::eval_boundary(0, 1), 0.0);
  EXPECT_NEAR(k::eval_boundary(0, 0.5), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(k::eval_boundary(0, std::exp(1.0)), -2.0, 1e-15);
  EXPECT_EQ(code_of([] { k::eval_boundary(1, 1); }), ErrorCode::DiagonalSingularity);
}

TEST(Lateral, Values) {
  // z = i, w = 1 on the unit circle.
  EXPECT_NEAR(k::eval_lateral(0, pi / 2, 0, 0), -std::log(2.0), 1e-14);
  const double a = k::eval_lateral(0.3, 0.4, 1.1, 2.2);
  EXPECT_NEAR(a, k::eval_lateral(1.1, 2.2, 0.3, 0.4), 1e-14);
  EXPECT_NEAR(a, k::eval_lateral(0.3 + 1.7, 0.4, 1.1 + 1.7, 2.2), 1e-12);
  EXPECT_EQ(code_of([] { k::eval_lateral(0, 4.0, 1, 1); }), ErrorCode::InvalidArgument);
}

TEST(Lateral, ZeroAngularAverage) {
  for (auto [s, t] : {std::pair{0.0, 0.5}, std::pair{0.2, 1.7}, std::pair{2.0, 0.1}}) {
    EXPECT_NEAR(k::lateral_angular_average(s, t, 512), 0.0, 1e-5);
  }
}

TEST(SemicircleAverage, Analytic) {
  EXPECT_DOUBLE_EQ(k::semicircle_avg_cov(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(k::semicircle_avg_cov(0, 5), 0.0);
  EXPECT_DOUBLE_EQ(k::semicircle_avg_cov(3, 3), 6.0);
}

TEST(SemicircleAverage, QuadratureMatches) {
  EXPECT_NEAR(k::quadrature_cov(1, 2, 2048), 2.0, 1e-6);
  EXPECT_NEAR(k::quadrature_cov(0.5, 0.5, 2048), 1.0, 1e-4);
  EXPECT_NEAR(k::quadrature_cov(2.5, 0.3, 256), 0.6, 1e-6);
  EXPECT_EQ(code_of([] { k::quadrature_cov(1, 2, 8, 1e-12); }), ErrorCode::QuadratureUnstable);
}

TEST(Perturbed, AddsG) {
  const k::HalfPlanePoint z{1, 1}, w{2, 1};
  const auto zero = k::KernelSpec::perturbed([](k::HalfPlanePoint, k::HalfPlanePoint) { return 0.0; });
  const auto constant = k::KernelSpec::perturbed([](k::HalfPlanePoint, k::HalfPlanePoint) { return 0.7; });
  const auto product =
      k::KernelSpec::perturbed([](k::HalfPlanePoint a, k::HalfPlanePoint b) { return 0.1 * a.x * b.x; });
  EXPECT_DOUBLE_EQ(zero(z, w), k::eval_neumann(z, w));
  EXPECT_NEAR(constant(z, w), k::eval_neumann(z, w) + 0.7, 1e-15);
  EXPECT_NEAR(product(z, w), k::eval_neumann(z, w) + 0.2, 1e-15);
  EXPECT_EQ(code_of([] { k::KernelSpec::perturbed([](k::HalfPlanePoint a, k::HalfPlanePoint) { return a.x; }); }),
            ErrorCode::InvalidArgument);
}

TEST(KernelSpec, Dispatch) {
  const k::HalfPlanePoint z{0.1, 0.5}, w{0.6, 0.2};
  EXPECT_DOUBLE_EQ(k::KernelSpec::exact_scaling_neumann()(z, w), k::eval_neumann(z, w));
  EXPECT_DOUBLE_EQ(k::KernelSpec::dirichlet_part()(z, w), k::eval_dirichlet(z, w));
  EXPECT_DOUBLE_EQ(k::KernelSpec::boundary_restriction()({0.1, 0}, {0.6, 0}), k::eval_boundary(0.1, 0.6));
  EXPECT_EQ(code_of([&] { k::KernelSpec::boundary_restriction()(z, w); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(k::KernelSpec::exact_scaling_neumann().perturbation(), nullptr);
}
