#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gmclab/error.hpp"
#include "gmclab/expcli.hpp"

namespace ex = gmclab::expcli;
using gmclab::Error;
using gmclab::ErrorCode;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gmclab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

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

TEST(Config, RoundTripIsLossless) {
  for (auto e : ex::all_experiments()) {
    auto c = ex::default_config(e);
    c.gamma = 1.0 / 3.0;
    c.seed = 0xfedcba9876543210ULL;
    c.t_grid = {0.1, std::sqrt(2.0), 1e6};
    const auto back = ex::config_from_json(ex::config_to_json(c));
    EXPECT_EQ(ex::config_to_json(back), ex::config_to_json(c));
    EXPECT_EQ(ex::config_hash(back), ex::config_hash(c));
    EXPECT_EQ(ex::parse_experiment(ex::to_string(e)), e);
  }
}

TEST(Config, DefaultsAndErrors) {
  const auto c = ex::config_from_json(R"({"experiment": "tail-fit", "gamma": 1.2})");
  EXPECT_EQ(c.N, ex::default_config(ex::Experiment::TailFit).N);
  EXPECT_DOUBLE_EQ(c.gamma, 1.2);
  EXPECT_EQ(code_of([] { ex::config_from_json(R"({"experiment": "tail-fit", "gama": 1})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { ex::config_from_json(R"({"experiment": "nope"})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { ex::config_from_json(R"({"experiment": "max-law", "gamma": 2.5})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { ex::config_from_json(R"({"experiment": "max-law", "N": "many"})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { ex::config_from_json("{not json"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { ex::config_from_json(R"({"experiment": "max-law", "t_grid": [2, 1]})"); }),
            ErrorCode::ConfigInvalid);
}

TEST(Config, HashIgnoresOutputAndThreads) {
  auto a = ex::default_config(ex::Experiment::MaxLaw);
  auto b = a;
  b.output_dir = "elsewhere";
  b.threads = 4;
  EXPECT_EQ(ex::config_hash(a), ex::config_hash(b));
  b.seed += 1;
  EXPECT_NE(ex::config_hash(a), ex::config_hash(b));
  EXPECT_EQ(ex::hex_hash(0x1ULL), "0000000000000001");
}

TEST(Csv, LongFormatRoundTrip) {
  const auto dir = scratch("csv");
  const std::vector<ex::SeriesPoint> rows{{"a", 1.0 / 3.0, std::exp(1.0), 1e-300}, {"b", -2.5e10, M_PI, 0.0}};
  const auto path = (dir / "t.csv").string();
  ex::write_long_csv(path, rows);
  const auto back = ex::read_long_csv(path);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].series, rows[i].series);
    EXPECT_NEAR(back[i].x, rows[i].x, 1e-12 * std::abs(rows[i].x));
    EXPECT_NEAR(back[i].y, rows[i].y, 1e-12 * std::abs(rows[i].y));
  }
  EXPECT_EQ(code_of([&] { ex::write_long_csv(path, {{"a,b", 0, 0, 0}}); }), ErrorCode::IoFailure);
}

TEST(Csv, SurvivalSchema) {
  const auto dir = scratch("surv");
  const auto path = (dir / "s.csv").string();
  ex::write_survival_csv(path, {{1.0, 0.5, 0.01, false}, {2.0, 0.0, 0.0, true}});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,phat,stderr");
  const auto back = ex::read_survival_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[1].boundary);
  EXPECT_EQ(code_of([] { ex::read_survival_csv("/nonexistent/x.csv"); }), ErrorCode::IoFailure);
}

TEST(Record, EmptyMetricsGiveHeaderOnly) {
  const auto dir = scratch("empty");
  ex::ResultRecord rec;
  const auto paths = ex::emit_plotdata(rec, dir.string());
  ASSERT_EQ(paths.size(), 1u);
  std::ifstream in(paths[0]);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all, "series,x,y,yerr\n");
}

TEST(Record, MetricsMustBeFiniteUnlessTagged) {
  ex::ResultRecord rec;
  EXPECT_EQ(code_of([&] { rec.set_metric("x", NAN); }), ErrorCode::InvalidArgument);
  rec.set_metric("y", INFINITY, true);
  EXPECT_TRUE(rec.divergent.count("y"));
  rec.check("ok", true);
  EXPECT_TRUE(rec.all_passed());
  rec.check("bad", false);
  EXPECT_FALSE(rec.all_passed());
}

TEST(Run, DeterministicAndWritesArtifacts) {
  auto c = ex::default_config(ex::Experiment::TailFit);
  c.N = 3000;
  c.output_dir = scratch("run").string();
  const auto a = ex::run(c);
  c.threads = 2;
  const auto b = ex::execute(c);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.config_hash, b.config_hash);
  for (const auto& p : a.artifacts) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "record.json"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "survival.csv"));
}

TEST(Run, MaxLawMetrics) {
  auto c = ex::default_config(ex::Experiment::MaxLaw);
  const auto r = ex::execute(c);
  EXPECT_LE(r.metric("ks_distance"), 0.002);
  EXPECT_TRUE(r.all_passed());
}

TEST(Run, KernelValidationPasses) {
  const auto r = ex::execute(ex::default_config(ex::Experiment::ValidateKernels));
  EXPECT_TRUE(r.all_passed());
}
