#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gmclab/error.hpp"
#include "gmclab/radial.hpp"
#include "gmclab/rng.hpp"

namespace rd = gmclab::radial;
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

struct Moments {
  double mean = 0.0;
  double se = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= n - 1.0;
  m.se = std::sqrt(m.var / n);
  return m;
}

}  // namespace

TEST(Maximum, ExponentialMean) {
  const rd::DriftSpec spec{std::sqrt(2.0)};
  EXPECT_NEAR(spec.alpha(), std::sqrt(2.0) / 2.0, 1e-15);
  std::vector<double> m(1000000);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rd::sample_max(spec, 3, i);
  EXPECT_NEAR(moments(m).mean, std::sqrt(2.0), 0.005 * std::sqrt(2.0));
  EXPECT_EQ(rd::sample_max(spec, 3, 17), m[17]);
}

TEST(Maximum, KolmogorovSmirnov) {
  const rd::DriftSpec spec{1.0};
  const std::size_t n = 200000;
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = rd::sample_max(spec, 8, i);
  std::sort(m.begin(), m.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = -std::expm1(-1.5 * m[i]);
    d = std::max({d, (i + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  // 1.63 / sqrt(n) is the 1% critical value.
  EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(Maximum, UnitDriftLaw) {
  const std::size_t n = 1000000;
  double hits = 0.0;
  for (std::size_t i = 0; i < n; ++i) hits += std::exp(rd::sample_max_unit(1.0, 4, i)) > 2.0;
  const double p = hits / n;
  EXPECT_NEAR(p, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(ConditionedPath, NegativeWithDrift) {
  const rd::DriftSpec spec{1.0};
  const double T = 50.0;
  const int n = 10000;
  double slope = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto p = rd::sample_conditioned_path(spec, T, 0.5, 1e-3, 6, i);
    ASSERT_LE(*std::max_element(p.values.begin(), p.values.end()), 0.0);
    slope += p.values.back() / T;
  }
  EXPECT_NEAR(slope / n, -spec.alpha(), 0.05 * spec.alpha());
}

TEST(ConditionedPath, StartInsensitivity) {
  const rd::DriftSpec spec{1.0};
  std::vector<double> a(20000), b(20000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::exp(rd::sample_conditioned_path(spec, 1.0, 0.1, 1e-3, 9, i).values.back());
    b[i] = std::exp(rd::sample_conditioned_path(spec, 1.0, 0.1, 1e-4, 10, i).values.back());
  }
  const auto ma = moments(a), mb = moments(b);
  EXPECT_LT(std::abs(ma.mean - mb.mean), 2.0 * std::hypot(ma.se, mb.se));
  EXPECT_EQ(code_of([&] { rd::sample_conditioned_path(spec, 1.0, 0.1, -1.0, 1, 0); }), ErrorCode::DegenerateStart);
}

// Post-maximum increments of directly simulated drifted paths against the
// conditioned sampler started at 0.
TEST(ConditionedPath, MatchesPostMaximumLaw) {
  const rd::DriftSpec spec{1.0};
  const double alpha = spec.alpha();
  const double h = 0.002;
  const int steps = static_cast<int>(20.0 / h);
  const int lag = static_cast<int>(1.0 / h);
  std::vector<double> direct;
  for (int i = 0; i < 3000; ++i) {
    gmclab::RandomStream rng(77, static_cast<std::uint64_t>(i));
    std::vector<double> w(static_cast<std::size_t>(steps) + 1, 0.0);
    for (int k = 1; k <= steps; ++k) w[k] = w[k - 1] + std::sqrt(2.0 * h) * rng.normal() - alpha * h;
    const auto arg = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
    if (arg + lag <= steps) direct.push_back(w[arg + lag] - w[arg]);
  }
  std::vector<double> sampled(20000);
  for (std::size_t i = 0; i < sampled.size(); ++i)
    sampled[i] = rd::sample_conditioned_path(spec, 1.0, 0.5, 0.0, 12, i).values.back();
  const auto md = moments(direct), ms = moments(sampled);
  // The grid maximum sits slightly below the true one; allow that bias.
  EXPECT_NEAR(md.mean, ms.mean, 3.0 * std::hypot(md.se, ms.se) + 0.06);
  EXPECT_NEAR(md.var, ms.var, 0.12 * ms.var);
}

TEST(Williams, Concatenation) {
  const rd::DriftSpec spec{1.0};
  const auto d = rd::sample_conditioned_path(spec, 10.0, 0.05, 0.0, 1, 0);
  const auto a = rd::sample_conditioned_path(spec, 10.0, 0.05, 0.0, 1, 1);
  const auto tp = rd::williams_concatenate(0.7, d, a);
  EXPECT_DOUBLE_EQ(tp.absolute(0), 0.7);
  for (std::ptrdiff_t k = -50; k <= 50; ++k) EXPECT_LE(tp.absolute(k), 0.7);
  const auto zero = rd::williams_concatenate(0.0, d, a);
  EXPECT_EQ(zero.left_cut, 0u);

  const auto other = rd::sample_conditioned_path(spec, 10.0, 0.1, 0.0, 1, 2);
  EXPECT_EQ(code_of([&] { rd::williams_concatenate(0.7, d, other); }), ErrorCode::IndexMismatch);
  EXPECT_EQ(code_of([&] { rd::williams_concatenate(-1.0, d, a); }), ErrorCode::InvalidArgument);
}

TEST(LastPassage, GridCrossing) {
  const std::vector<double> path{0.0, -0.5, -1.0, -0.8, -1.5, -2.0};
  const auto [k, frac] = rd::last_passage(path, 1.2);
  EXPECT_EQ(k, 3u);
  EXPECT_NEAR(frac, 0.4 / 0.7, 1e-12);
  EXPECT_EQ(code_of([&] { rd::last_passage(path, 5.0); }), ErrorCode::TruncationTooShort);
}

TEST(Lateral, BasisMeanMatchesBetaIntegral) {
  for (double gamma : {0.5, 1.0, 1.3}) {
    const auto basis = rd::make_lateral_basis(gamma, {64, 64});
    const double a = 0.5 * gamma * gamma;
    const double exact = std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (1.0 - a)) / std::tgamma(1.0 - 0.5 * a);
    EXPECT_NEAR(basis.mean_ZH, exact, 1e-8 * exact) << gamma;
    EXPECT_EQ(basis.window, 0.0);
  }
  EXPECT_GT(rd::make_lateral_basis(1.6, {32, 32}).window, 0.0);
}

TEST(Lateral, ExactMeansAndStationarity) {
  const auto basis = rd::make_lateral_basis(1.0, {32, 32});
  const std::size_t N = 10000;
  std::vector<double> zh0(N), zh_far(N), zb(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto s = rd::sample_lateral(basis, 0.0, 201, 0.05, 31, n);
    zh0[n] = s.ZH.front();
    zh_far[n] = s.ZH.back();
    zb[n] = s.Zbdy.front();
  }
  const auto m0 = moments(zh0), mf = moments(zh_far), mb = moments(zb);
  EXPECT_NEAR(m0.mean, basis.mean_ZH, 3.0 * m0.se);
  EXPECT_NEAR(mb.mean, 2.0, 3.0 * mb.se);
  EXPECT_NEAR(m0.mean, mf.mean, 3.0 * std::hypot(m0.se, mf.se));
}

TEST(ComputeI, SyntheticExponential) {
  const double gamma = 1.0, ds = 0.01;
  const auto basis = rd::make_lateral_basis(gamma, {16, 16});
  rd::TwoSidedPath path;
  path.ds = ds;
  const std::size_t n = 4001;
  for (std::size_t k = 0; k < n; ++k) {
    path.right.push_back(-static_cast<double>(k) * ds);
    path.left.push_back(-static_cast<double>(k) * ds);
  }
  rd::LateralSample lat;
  lat.ds = ds;
  lat.s_begin = -static_cast<double>(n - 1) * ds;
  lat.ZH.assign(2 * n - 1, 1.0);
  lat.Zbdy.assign(2 * n - 1, 1.0);
  lat.bulk_begin = 0;
  lat.bulk_end = 2 * n - 1;
  const auto one_side = rd::compute_I(path, lat, basis, 0.0);
  EXPECT_NEAR(one_side.IH, 1.0 / gamma, 1e-9);
  EXPECT_NEAR(one_side.Ibdy, 2.0 / gamma, 1e-8);
  const auto both = rd::compute_I(path, lat, basis, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(both.IH, 2.0 / gamma, 1e-9);

  lat.ZH.pop_back();
  EXPECT_EQ(code_of([&] { rd::compute_I(path, lat, basis, 0.0); }), ErrorCode::IndexMismatch);
}

TEST(ComputeI, IncreasingInX) {
  const auto basis = rd::make_lateral_basis(1.0, {32, 32});
  rd::RadialConfig config;
  config.lateral = {32, 32};
  for (std::uint64_t rep = 0; rep < 30; ++rep) {
    const auto joint = rd::sample_joint(basis, config, 5, rep);
    double prev = 0.0;
    for (double x : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const auto I = rd::compute_I(joint.path, joint.lateral, basis, x, 1.0);
      EXPECT_GE(I.IH, prev);
      prev = I.IH;
    }
  }
}

TEST(ComputeI, HorizonDoublingWithinBound) {
  const auto basis = rd::make_lateral_basis(1.0, {32, 32});
  rd::RadialConfig shorter;
  shorter.lateral = {32, 32};
  rd::RadialConfig longer = shorter;
  longer.T = 2.0 * shorter.T;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const auto a = rd::sample_I_infinity(basis, shorter, 2, rep);
    const auto b = rd::sample_I_infinity(basis, longer, 2, rep);
    EXPECT_LE(std::abs(a.IH - b.IH), a.bound_H + 1e-12 * a.IH);
  }
}

TEST(RadialMass, Limits) {
  rd::RadialConfig config;
  config.lateral = {32, 32};
  const auto tiny = rd::make_lateral_basis(1e-6, config.lateral);
  const double rho = 0.3;
  const double m = rd::radial_bulk_mass(tiny, config, rho, 1, 0);
  EXPECT_NEAR(m, 0.5 * std::numbers::pi * rho * rho, 1e-3 * m);

  const auto basis = rd::make_lateral_basis(1.0, config.lateral);
  EXPECT_EQ(rd::radial_bulk_mass(basis, config, 0.25, 4, 9), rd::radial_bulk_mass(basis, config, 0.25, 4, 9));
  EXPECT_EQ(code_of([&] { rd::radial_bulk_mass(basis, config, 1.0, 4, 9); }), ErrorCode::InvalidRho);
}
