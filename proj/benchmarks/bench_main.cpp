#include <benchmark/benchmark.h>

#include <vector>

#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/kernels.hpp"
#include "gmclab/radial.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/tailest.hpp"

using namespace gmclab;

static void BM_Philox(benchmark::State& state) {
  std::array<std::uint32_t, 4> ctr{0, 0, 0, 0};
  for (auto _ : state) {
    ctr[0]++;
    benchmark::DoNotOptimize(philox4x32(ctr, {1, 2}));
  }
}
BENCHMARK(BM_Philox);

static void BM_FillNormal(benchmark::State& state) {
  std::vector<double> z(static_cast<std::size_t>(state.range(0)));
  RandomStream rng(1, 0);
  for (auto _ : state) {
    rng.fill_normal(z);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillNormal)->Arg(4096);

static void BM_QuadratureCov(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::quadrature_cov(1.0, 2.0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_QuadratureCov)->Arg(256)->Arg(1024);

static void BM_BuildCov(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto grid = fieldsim::build_grid(0.5, n, 2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(fieldsim::build_cov(grid, fieldsim::KernelSpec::exact_scaling_neumann()));
}
BENCHMARK(BM_BuildCov)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_LocalizedWeights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto grid = fieldsim::build_grid(0.5, n, 2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(gmc::localized_weights(grid, {1.0, 0.5}, 0.0));
}
BENCHMARK(BM_LocalizedWeights)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_SampleLocalized(benchmark::State& state) {
  const auto model = tailest::make_grid_model(1.0, 0.5, 16, 32);
  const auto N = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tailest::sample_localized(model, N, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleLocalized)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_SampleMax(benchmark::State& state) {
  const radial::DriftSpec spec{1.0};
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(radial::sample_max(spec, 1, i++));
}
BENCHMARK(BM_SampleMax);

static void BM_ConditionedPath(benchmark::State& state) {
  const radial::DriftSpec spec{1.0};
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(radial::sample_conditioned_path(spec, 30.0, 0.05, 1e-3, 1, i++));
}
BENCHMARK(BM_ConditionedPath)->Unit(benchmark::kMicrosecond);

static void BM_RadialIntegral(benchmark::State& state) {
  radial::RadialConfig config;
  config.lateral.n_theta = config.lateral.n_modes = static_cast<int>(state.range(0));
  const auto basis = radial::make_lateral_basis(1.0, config.lateral);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(radial::sample_I_infinity(basis, config, 1, i++));
}
BENCHMARK(BM_RadialIntegral)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
