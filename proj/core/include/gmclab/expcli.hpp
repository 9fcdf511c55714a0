#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gmclab/tailest.hpp"

namespace gmclab::expcli {

enum class Experiment {
  ValidateKernels,
  ValidateGirsanov,
  MaxLaw,
  TailFit,
  ConstantTwoRoute,
  QuotientMoments,
  ZetaScaling,
  PerturbedG,
  LocalityGap,
};

std::string_view to_string(Experiment e) noexcept;
/// ConfigInvalid for an unknown name.
Experiment parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

struct GridSettings {
  int n_bulk = 16;
  int n_bdy = 32;
};

struct RadialSettings {
  double T = 30.0;
  double ds = 0.05;
  int n_theta = 64;
  double eps = 1e-3;

  radial::RadialConfig to_config() const;
};

/// Every field has an explicit default and is written back into each record.
/// Fields after `output_dir` are experiment-specific knobs; experiments that
/// do not use them ignore them.
struct ExperimentConfig {
  Experiment experiment = Experiment::TailFit;
  double gamma = 1.0;
  double r = 0.5;
  GridSettings grid;
  RadialSettings radial;
  std::uint64_t N = 20000;
  std::uint64_t seed = 1;
  std::vector<double> t_grid;  ///< empty: chosen from the samples
  std::string output_dir = "gmclab-out";

  std::uint64_t radial_N = 0;  ///< 0: same as N
  double v = 0.0;
  double rho = 0.25;
  std::vector<double> rhos{0.05, 0.1, 0.2, 0.4};
  double p = 1.0;
  double q = 1.0;
  double law_power = 0.3;
  double g_constant = 0.5;
  double tolerance = 0.15;  ///< experiment-specific acceptance band
  std::size_t threads = 0;  ///< 0: GMCLAB_THREADS or 1

  /// ConfigInvalid with the offending field named.
  void validate() const;
  std::uint64_t effective_radial_N() const noexcept { return radial_N == 0 ? N : radial_N; }
  std::size_t effective_threads() const;
};

/// Defaults tuned per experiment (grid size, N, tolerance).
ExperimentConfig default_config(Experiment e);

std::string config_to_json(const ExperimentConfig& config, int indent = 2);
/// Missing keys take the defaults of default_config(experiment); unknown keys
/// and type errors raise ConfigInvalid.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a 64 over the compact canonical JSON of the config.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hex_hash(std::uint64_t hash);

/// One row of a long-format plot table.
struct SeriesPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  double yerr = 0.0;
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ResultRecord {
  std::string config_hash;
  std::string experiment;
  std::string config_json;
  std::map<std::string, double> metrics;
  std::set<std::string> divergent;  ///< metrics tagged as divergence diagnostics
  std::vector<Assertion> assertions;
  std::vector<std::string> artifacts;
  double wall_time = 0.0;
  std::string code_version;

  /// Long-format tables keyed by file stem, and survival curves (t, phat, stderr).
  std::map<std::string, std::vector<SeriesPoint>> tables;
  std::map<std::string, std::vector<tailest::SurvivalPoint>> survival;

  /// InvalidArgument for a non-finite value unless divergent is set.
  void set_metric(const std::string& key, double value, bool divergent_diagnostic = false);
  double metric(const std::string& key) const;
  void check(const std::string& name, bool passed, const std::string& detail = {});
  bool all_passed() const noexcept;
};

std::string code_version();

std::string record_to_json(const ResultRecord& record, int indent = 2);

/// Writes every table, every survival curve and metrics.csv into dir and
/// returns the paths (also appended to record.artifacts). IoFailure on error.
std::vector<std::string> emit_plotdata(ResultRecord& record, const std::string& dir);

void write_long_csv(const std::string& path, const std::vector<SeriesPoint>& rows);
std::vector<SeriesPoint> read_long_csv(const std::string& path);
void write_survival_csv(const std::string& path, const std::vector<tailest::SurvivalPoint>& curve);
std::vector<tailest::SurvivalPoint> read_survival_csv(const std::string& path);

/// Runs the experiment without touching the file system.
ResultRecord execute(const ExperimentConfig& config);

/// execute + emit_plotdata + record.json in config.output_dir.
ResultRecord run(const ExperimentConfig& config);

}  // namespace gmclab::expcli
