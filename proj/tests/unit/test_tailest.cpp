#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmclab/error.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/tailest.hpp"

namespace te = gmclab::tailest;
using gmclab::Error;
using gmclab::ErrorCode;

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

std::vector<double> pareto(double alpha, std::size_t n, std::uint64_t seed) {
  gmclab::RandomStream rng(seed, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = std::pow(rng.uniform(), -1.0 / alpha);
  return x;
}

// Independent restatement of both inequality systems, T = 2/gamma^2.
bool oracle_feasible(double gamma, const te::FeasibleParams& w) {
  const double T = 2.0 / (gamma * gamma);
  const double p = w.p, eta = w.eta, d = w.delta, dp = w.dp;
  if (!(d > 0 && eta > 0 && eta < 1 && p > T)) return false;
  if (w.system == te::FeasibilitySystem::Eq16) return dp > 0 && p < T + dp && eta > d && p * (1 - eta) > T + d;
  return p < std::min({T + dp, T + 0.5, 4.0 / (gamma * gamma)}) && dp > 0 && p * (1 - eta) > T * (1 - eta) + d &&
         eta * (T + 0.5) > T + d;
}

}  // namespace

TEST(Survival, SmallExamples) {
  const std::vector<double> s{1, 2, 3};
  const std::vector<double> ts{0.5, 2.5, 4.0};
  const auto c = te::survival_curve(s, ts);
  EXPECT_DOUBLE_EQ(c[0].phat, 1.0);
  EXPECT_TRUE(c[0].boundary);
  EXPECT_DOUBLE_EQ(c[1].phat, 1.0 / 3.0);
  EXPECT_NEAR(c[1].stderr, std::sqrt(2.0 / 27.0), 1e-15);
  EXPECT_DOUBLE_EQ(c[2].phat, 0.0);
  EXPECT_DOUBLE_EQ(c[2].stderr, 0.0);
  EXPECT_TRUE(c[2].boundary);
  EXPECT_EQ(code_of([&] { te::survival_curve(std::vector<double>{}, ts); }), ErrorCode::EmptySample);
  const std::vector<double> bad{2.0, 1.0};
  EXPECT_EQ(code_of([&] { te::survival_curve(s, bad); }), ErrorCode::InvalidArgument);
}

TEST(Quantiles, Basics) {
  const std::vector<double> s{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(te::quantile(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(te::quantile(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(te::quantile(s, 1.0), 4.0);
  const auto g = te::log_grid(1.0, 100.0, 3);
  EXPECT_NEAR(g[1], 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(g[2], 100.0);
}

TEST(FitTail, ParetoRecovery) {
  const auto x = pareto(2.0, 100000, 1);
  const auto ts = te::log_grid(1.5, te::quantile(x, 0.999), 40);
  const auto curve = te::survival_curve(x, ts);
  const auto fit = te::fit_tail(curve, ts.front(), ts.back());
  EXPECT_NEAR(fit.exponent, 2.0, 0.05);
  const auto pinned = te::fit_constant(curve, ts.front(), ts.back(), 2.0);
  EXPECT_NEAR(pinned.constant, 1.0, 0.05);
  EXPECT_EQ(code_of([&] { te::fit_tail(curve, 2.0, 2.1); }), ErrorCode::DegenerateWindow);
}

TEST(FitTail, ExponentialOfMaximum) {
  // e^{gamma M} with M ~ Exp(alpha): tail exponent alpha / gamma = 1.5 at gamma = 1.
  gmclab::RandomStream rng(2, 0);
  std::vector<double> x(100000);
  for (auto& v : x) v = std::exp(rng.exponential(1.5));
  const auto ts = te::log_grid(2.0, te::quantile(x, 0.999), 40);
  const auto fit = te::fit_tail(te::survival_curve(x, ts), ts.front(), ts.back());
  EXPECT_NEAR(fit.exponent, 1.5, 0.05);
}

TEST(FitTail, Hill) {
  const auto x = pareto(2.0, 100000, 3);
  EXPECT_NEAR(te::fit_tail_hill(x, 2000).exponent, 2.0, 0.1);
  EXPECT_EQ(code_of([&] { te::fit_tail_hill(std::vector<double>(10, 1.0), 2); }), ErrorCode::DegenerateWindow);
}

TEST(Plateau, FindsStableRun) {
  std::vector<te::StabilityPoint> s;
  for (double e : {1.5, 1.7, 1.95, 2.02, 1.98, 2.05, 2.4}) s.push_back({1, 10, e, 0.01});
  const auto p = te::find_plateau(s, 2.0, 0.1);
  ASSERT_TRUE(p.found);
  EXPECT_EQ(p.begin, 2u);
  EXPECT_EQ(p.length, 4u);
  EXPECT_FALSE(te::find_plateau(s, 3.0, 0.1).found);
}

class SmallGrid : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { model_ = new te::GridModel(te::make_grid_model(1.0, 0.5, 6, 12)); }
  static void TearDownTestSuite() { delete model_; }
  static te::GridModel* model_;
};
te::GridModel* SmallGrid::model_ = nullptr;

TEST_F(SmallGrid, LocalizedAgreesWithPlain) {
  const std::size_t N = 100000;
  const auto loc = te::sample_localized(*model_, N, 5);
  const auto plain = te::sample_localized(*model_, N, 6);
  const double t90 = te::quantile(plain.plain_bulk, 0.9);
  const auto is = te::localized_estimate(loc, t90);
  const auto pc = te::survival_curve(plain.plain_bulk, std::vector<double>{t90});
  EXPECT_NEAR(is.value, pc[0].phat, 3.0 * std::hypot(is.stderr, pc[0].stderr));

  const auto zero = te::localized_estimate(loc, 1e-12);
  EXPECT_NEAR(zero.value, 1.0, 3.0 * zero.stderr);

  const double t999 = te::quantile(plain.plain_bulk, 0.999);
  const auto deep = te::localized_estimate(loc, t999);
  const auto deep_plain = te::survival_curve(plain.plain_bulk, std::vector<double>{t999})[0];
  EXPECT_LT(deep.stderr / deep.value, deep_plain.stderr / deep_plain.phat);
}

TEST_F(SmallGrid, GirsanovAndMeans) {
  const auto g = te::girsanov_comparison(*model_, [](double m) { return std::tanh(m); }, 100000, 11);
  EXPECT_LT(std::abs(g.z_score), 3.0);
  const auto rm = te::renormalization_means(*model_, 100000, 12);
  EXPECT_NEAR(rm.bulk.value, rm.bulk_target, 3.0 * rm.bulk.stderr);
  EXPECT_NEAR(rm.bdy.value, rm.bdy_target, 3.0 * rm.bdy.stderr);
  EXPECT_DOUBLE_EQ(rm.bdy_target, 1.0);
}

TEST(Girsanov, StrongerCoupling) {
  const auto model = te::make_grid_model(1.5, 0.5, 6, 12);
  const auto g = te::girsanov_comparison(model, [](double m) { return m / (1.0 + m); }, 100000, 13);
  EXPECT_LT(std::abs(g.z_score), 3.0);
}

TEST_F(SmallGrid, LocalityGapEdges) {
  const std::vector<double> huge{1e30};
  const auto far = te::locality_gap(*model_, 0.0, 0.2, huge, 2000, 3);
  EXPECT_DOUBLE_EQ(far[0].gap.value, 0.0);
  EXPECT_DOUBLE_EQ(far[0].local.value, 0.0);
  const std::vector<double> tiny{1e-300};
  EXPECT_LE(te::locality_gap(*model_, 0.0, 0.2, tiny, 2000, 3)[0].gap.value, 0.0);
  EXPECT_EQ(code_of([&] { te::locality_gap(*model_, 0.0, 0.3, huge, 10, 3); }), ErrorCode::GeometryViolation);
}

TEST_F(SmallGrid, ThreadCountDoesNotChangeResults) {
  const auto a = te::sample_localized(*model_, 1000, 21, 1);
  const auto b = te::sample_localized(*model_, 1000, 21, 3);
  EXPECT_EQ(a.plain_bulk, b.plain_bulk);
  EXPECT_TRUE(a.loc_bulk == b.loc_bulk);
}

TEST(Constant, PrefactorArithmetic) {
  te::ConstantOptions opt;
  opt.integrand_override = [](std::size_t) { return 1.0; };
  opt.bootstrap = 50;
  gmclab::radial::RadialConfig config;
  const auto c = te::estimate_constant_radial(std::sqrt(2.0), 1.0, config, 100, 1, 1, opt);
  EXPECT_NEAR(c.constant, 1.0, 1e-14);
  EXPECT_NEAR(c.ci_low, 1.0, 1e-14);
  EXPECT_NEAR(te::radial_prefactor(1.0, 0.5), 0.75, 1e-15);
}

TEST(Constant, HeavySummary) {
  std::vector<double> v(1000, 1.0);
  v.back() = 1001.0;
  te::ConstantOptions opt;
  opt.trim = 1e-3;
  const auto s = te::summarize_heavy(v, 2.0, 3, opt);
  EXPECT_NEAR(s.constant, 2.0 * 2.0, 1e-12);
  EXPECT_NEAR(s.trimmed_constant, 2.0, 1e-12);
}

TEST(Moments, Windows) {
  EXPECT_TRUE(te::finite_predicted(1.0, 2.0, 1.0));
  EXPECT_FALSE(te::finite_predicted(1.0, 2.6, 1.0));
  const std::vector<double> bulk(100, 2.0), bdy(100, 4.0);
  const auto q = te::quotient_moment(bulk, bdy, 1.0, 1.5, 0.5);
  EXPECT_NEAR(q.estimate, std::pow(2.0, 1.5) / 2.0, 1e-12);
}

TEST(Zeta, Identities) {
  EXPECT_DOUBLE_EQ(te::zeta_tilde(0.5, 1.0, 1.3), 0.0);
  EXPECT_DOUBLE_EQ(te::zeta_tilde(1.0, 1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(te::zeta_tilde(2.0, 2.0, 1.0), 0.5);
  for (double g : {0.4, 1.0, 1.7}) {
    for (double u : {0.1, 0.7, 2.0}) {
      const double q = 1.3;
      EXPECT_NEAR(te::zeta_tilde(q / 2 + u, q, g) - te::zeta_tilde(q / 2 - u, q, g), 2.0 * (2.0 - 0.5 * g * g) * u,
                  1e-13);
    }
  }
}

TEST(Fits, LogLogExactLine) {
  const std::vector<double> x{0.1, 0.2, 0.4, 0.8};
  std::vector<double> y, e;
  for (double v : x) {
    y.push_back(3.0 * std::pow(v, 0.7));
    e.push_back(0.01 * y.back());
  }
  const auto f = te::loglog_fit(x, y, e);
  EXPECT_NEAR(f.slope, 0.7, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-12);
}

TEST(Feasibility, WitnessesVerified) {
  for (double g : {0.5, 1.0, std::sqrt(2.0), 1.8}) {
    for (auto sys : {te::FeasibilitySystem::Eq16, te::FeasibilitySystem::Eq20}) {
      const auto w = te::feasible_params(g, sys);
      EXPECT_TRUE(w.verified);
      EXPECT_TRUE(oracle_feasible(g, w)) << g << " " << te::to_string(sys);
    }
  }
  const auto w = te::feasible_params(std::sqrt(2.0), te::FeasibilitySystem::Eq16);
  EXPECT_NEAR(w.p, 1.001, 1e-12);
}

TEST(Feasibility, CheckerExamples) {
  te::FeasibleParams w{2.05, 0.96, 1e-3, 0.1, te::FeasibilitySystem::Eq20, false};
  EXPECT_TRUE(te::check_feasible(1.0, w));
  EXPECT_TRUE(oracle_feasible(1.0, w));
  w.delta = 0.01;  // p(1 - eta) = 0.082 < 0.08 + 0.01
  EXPECT_FALSE(te::check_feasible(1.0, w));
  EXPECT_EQ(te::parse_system("eq. (16)"), te::FeasibilitySystem::Eq16);
  EXPECT_EQ(te::parse_system("EQ20"), te::FeasibilitySystem::Eq20);
  EXPECT_EQ(code_of([] { te::parse_system("Eq17"); }), ErrorCode::InvalidArgument);
}

TEST(PerturbedFactor, ClosedForms) {
  const double r = 0.5;
  EXPECT_NEAR(te::perturbed_constant_factor([](double) { return 0.0; }, r, 1.3), 2 * r, 1e-12);
  EXPECT_NEAR(te::perturbed_constant_factor([](double) { return 0.4; }, r, 1.0), 2 * r * std::exp(0.4), 1e-12);
  EXPECT_NEAR(te::perturbed_constant_factor([](double v) { return v * v; }, r, std::sqrt(2.0)), 2 * r, 1e-12);
  // Simpson oracle for exp(v^2) on [-r, r].
  const int n = 2000;
  const double h = 2 * r / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = -r + i * h;
    s += (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2)) * std::exp(v * v);
  }
  EXPECT_NEAR(te::perturbed_constant_factor([](double v) { return v * v; }, r, 1.0), s * h / 3, 1e-10);
}
