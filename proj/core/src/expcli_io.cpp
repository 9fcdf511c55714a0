#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gmclab/error.hpp"
#include "gmclab/expcli.hpp"
#include "gmclab/parallel.hpp"

#ifndef GMCLAB_VERSION
#define GMCLAB_VERSION "unknown"
#endif

namespace gmclab::expcli {

using nlohmann::json;

namespace {

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::ValidateKernels, "validate-kernels"},
    {Experiment::ValidateGirsanov, "validate-girsanov"},
    {Experiment::MaxLaw, "max-law"},
    {Experiment::TailFit, "tail-fit"},
    {Experiment::ConstantTwoRoute, "constant-two-route"},
    {Experiment::QuotientMoments, "quotient-moments"},
    {Experiment::ZetaScaling, "zeta-scaling"},
    {Experiment::PerturbedG, "perturbed-g"},
    {Experiment::LocalityGap, "locality-gap"},
};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

json to_json_value(const ExperimentConfig& c) {
  json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["gamma"] = c.gamma;
  j["r"] = c.r;
  j["grid"] = {{"n_bulk", c.grid.n_bulk}, {"n_bdy", c.grid.n_bdy}};
  j["radial"] = {{"T", c.radial.T}, {"ds", c.radial.ds}, {"n_theta", c.radial.n_theta}, {"eps", c.radial.eps}};
  j["N"] = c.N;
  j["seed"] = c.seed;
  j["t_grid"] = c.t_grid;
  j["output_dir"] = c.output_dir;
  j["radial_N"] = c.radial_N;
  j["v"] = c.v;
  j["rho"] = c.rho;
  j["rhos"] = c.rhos;
  j["p"] = c.p;
  j["q"] = c.q;
  j["law_power"] = c.law_power;
  j["g_constant"] = c.g_constant;
  j["tolerance"] = c.tolerance;
  j["threads"] = c.threads;
  return j;
}

template <class T>
void read_field(const json& j, const std::string& key, T& out) {
  try {
    out = j.get<T>();
  } catch (const json::exception& e) {
    invalid("field '" + key + "': " + e.what());
  }
}

void read_grid(const json& j, GridSettings& g) {
  if (!j.is_object()) invalid("field 'grid' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "n_bulk") read_field(value, "grid.n_bulk", g.n_bulk);
    else if (key == "n_bdy") read_field(value, "grid.n_bdy", g.n_bdy);
    else invalid("unknown field 'grid." + key + "'");
  }
}

void read_radial(const json& j, RadialSettings& r) {
  if (!j.is_object()) invalid("field 'radial' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "T") read_field(value, "radial.T", r.T);
    else if (key == "ds") read_field(value, "radial.ds", r.ds);
    else if (key == "n_theta") read_field(value, "radial.n_theta", r.n_theta);
    else if (key == "eps") read_field(value, "radial.eps", r.eps);
    else invalid("unknown field 'radial." + key + "'");
  }
}

bool strictly_increasing_positive(const std::vector<double>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !std::isfinite(xs[i])) return false;
    if (i > 0 && !(xs[i] > xs[i - 1])) return false;
  }
  return true;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw Error(ErrorCode::IoFailure, "bad number '" + s + "' in " + path);
  return x;
}

std::vector<std::vector<std::string>> read_table(const std::string& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != header)
    throw Error(ErrorCode::IoFailure, "unexpected header in " + path);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw Error(ErrorCode::IoFailure, "ragged row in " + path);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::string_view to_string(Experiment e) noexcept {
  for (const auto& [k, name] : kNames)
    if (k == e) return name;
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  invalid("unknown experiment '" + std::string(name) + "'");
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> list = [] {
    std::vector<Experiment> v;
    for (const auto& entry : kNames) v.push_back(entry.first);
    return v;
  }();
  return list;
}

radial::RadialConfig RadialSettings::to_config() const {
  radial::RadialConfig c;
  c.T = T;
  c.ds = ds;
  c.eps = eps;
  c.lateral.n_theta = n_theta;
  c.lateral.n_modes = n_theta;
  return c;
}

void ExperimentConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 2.0)) invalid("gamma must lie in (0, 2)");
  if (!(r > 0.0) || !std::isfinite(r)) invalid("r must be positive");
  if (grid.n_bulk < 0 || grid.n_bdy < 1) invalid("grid needs n_bulk >= 0 and n_bdy >= 1");
  const auto nodes = static_cast<std::size_t>(grid.n_bulk) * static_cast<std::size_t>(grid.n_bulk) +
                     static_cast<std::size_t>(grid.n_bdy);
  if (nodes > fieldsim::kMaxNodes) invalid("grid exceeds " + std::to_string(fieldsim::kMaxNodes) + " nodes");
  if (!(radial.T > 0.0) || !(radial.ds > 0.0) || radial.ds >= radial.T) invalid("radial needs 0 < ds < T");
  if (radial.n_theta < 4) invalid("radial.n_theta must be at least 4");
  if (!(radial.eps >= 0.0)) invalid("radial.eps must be non-negative");
  if (N < 2) invalid("N must be at least 2");
  if (!strictly_increasing_positive(t_grid)) invalid("t_grid must be positive and strictly increasing");
  if (output_dir.empty()) invalid("output_dir must not be empty");
  if (!(rho > 0.0)) invalid("rho must be positive");
  if (rhos.size() < 2 || !strictly_increasing_positive(rhos)) invalid("rhos needs >= 2 increasing positive radii");
  if (!std::isfinite(v) || !(std::abs(v) < r)) invalid("v must lie in (-r, r)");
  if (!std::isfinite(p) || !std::isfinite(q) || q < 0.0) invalid("p must be finite and q >= 0");
  if (!(law_power > 0.0)) invalid("law_power must be positive");
  if (!std::isfinite(g_constant)) invalid("g_constant must be finite");
  if (!(tolerance > 0.0)) invalid("tolerance must be positive");
}

std::size_t ExperimentConfig::effective_threads() const { return threads == 0 ? default_thread_count() : threads; }

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::ValidateKernels:
      c.N = 2;
      c.tolerance = 1e-6;
      break;
    case Experiment::ValidateGirsanov:
      c.grid = {6, 12};
      c.N = 100000;
      c.tolerance = 3.0;
      break;
    case Experiment::MaxLaw:
      c.N = 1000000;
      c.tolerance = 0.002;
      break;
    case Experiment::TailFit:
      c.N = 100000;
      c.tolerance = 0.15;
      break;
    case Experiment::ConstantTwoRoute:
      c.N = 100000;
      c.radial_N = 100000;
      c.tolerance = 0.30;
      break;
    case Experiment::QuotientMoments:
      c.r = 0.25;
      c.grid = {32, 32};
      c.N = 20000;
      c.radial_N = 20000;
      c.rho = 0.25;
      c.tolerance = 0.15;
      break;
    case Experiment::ZetaScaling:
      c.r = 0.4;
      c.grid = {48, 96};
      c.N = 20000;
      c.tolerance = 0.2;
      break;
    case Experiment::PerturbedG:
      c.N = 100000;
      c.tolerance = 0.25;
      break;
    case Experiment::LocalityGap:
      c.N = 100000;
      c.rho = 0.125;
      c.tolerance = 1.0;
      break;
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& config, int indent) { return to_json_value(config).dump(indent); }

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) invalid("configuration must be a JSON object");
  if (!j.contains("experiment")) invalid("missing field 'experiment'");
  std::string name;
  read_field(j.at("experiment"), "experiment", name);
  ExperimentConfig c = default_config(parse_experiment(name));

  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") continue;
    else if (key == "gamma") read_field(value, key, c.gamma);
    else if (key == "r") read_field(value, key, c.r);
    else if (key == "grid") read_grid(value, c.grid);
    else if (key == "radial") read_radial(value, c.radial);
    else if (key == "N") read_field(value, key, c.N);
    else if (key == "seed") read_field(value, key, c.seed);
    else if (key == "t_grid") read_field(value, key, c.t_grid);
    else if (key == "output_dir") read_field(value, key, c.output_dir);
    else if (key == "radial_N") read_field(value, key, c.radial_N);
    else if (key == "v") read_field(value, key, c.v);
    else if (key == "rho") read_field(value, key, c.rho);
    else if (key == "rhos") read_field(value, key, c.rhos);
    else if (key == "p") read_field(value, key, c.p);
    else if (key == "q") read_field(value, key, c.q);
    else if (key == "law_power") read_field(value, key, c.law_power);
    else if (key == "g_constant") read_field(value, key, c.g_constant);
    else if (key == "tolerance") read_field(value, key, c.tolerance);
    else if (key == "threads") read_field(value, key, c.threads);
    else invalid("unknown field '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  // threads and output_dir do not change any number, so they stay out of the hash.
  json j = to_json_value(config);
  j.erase("threads");
  j.erase("output_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void ResultRecord::set_metric(const std::string& key, double value, bool divergent_diagnostic) {
  if (!std::isfinite(value) && !divergent_diagnostic)
    throw Error(ErrorCode::InvalidArgument, "metric '" + key + "' is not finite");
  metrics[key] = value;
  if (divergent_diagnostic) divergent.insert(key);
}

double ResultRecord::metric(const std::string& key) const {
  auto it = metrics.find(key);
  if (it == metrics.end()) throw Error(ErrorCode::InvalidArgument, "no metric '" + key + "'");
  return it->second;
}

void ResultRecord::check(const std::string& name, bool passed, const std::string& detail) {
  assertions.push_back({name, passed, detail});
}

bool ResultRecord::all_passed() const noexcept {
  for (const auto& a : assertions)
    if (!a.passed) return false;
  return true;
}

std::string code_version() { return GMCLAB_VERSION; }

std::string record_to_json(const ResultRecord& record, int indent) {
  json j;
  j["config_hash"] = record.config_hash;
  j["experiment"] = record.experiment;
  j["config"] = json::parse(record.config_json.empty() ? "{}" : record.config_json);
  json metrics = json::object();
  for (const auto& [k, v] : record.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(format_double(v));
  j["metrics"] = metrics;
  j["divergent_diagnostics"] = record.divergent;
  json asserts = json::array();
  for (const auto& a : record.assertions) asserts.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  j["assertions"] = asserts;
  j["passed"] = record.all_passed();
  j["artifacts"] = record.artifacts;
  j["wall_time"] = record.wall_time;
  j["code_version"] = record.code_version;
  return j.dump(indent);
}

void write_long_csv(const std::string& path, const std::vector<SeriesPoint>& rows) {
  auto out = open_out(path);
  out << "series,x,y,yerr\n";
  for (const auto& row : rows) {
    if (row.series.find_first_of(",\"\n") != std::string::npos)
      throw Error(ErrorCode::IoFailure, "series name needs quoting: " + row.series);
    out << row.series << ',' << format_double(row.x) << ',' << format_double(row.y) << ','
        << format_double(row.yerr) << '\n';
  }
  finish(out, path);
}

std::vector<SeriesPoint> read_long_csv(const std::string& path) {
  std::vector<SeriesPoint> rows;
  for (const auto& cells : read_table(path, {"series", "x", "y", "yerr"}))
    rows.push_back({cells[0], parse_double(cells[1], path), parse_double(cells[2], path), parse_double(cells[3], path)});
  return rows;
}

void write_survival_csv(const std::string& path, const std::vector<tailest::SurvivalPoint>& curve) {
  auto out = open_out(path);
  out << "t,phat,stderr\n";
  for (const auto& p : curve)
    out << format_double(p.t) << ',' << format_double(p.phat) << ',' << format_double(p.stderr) << '\n';
  finish(out, path);
}

std::vector<tailest::SurvivalPoint> read_survival_csv(const std::string& path) {
  std::vector<tailest::SurvivalPoint> curve;
  for (const auto& cells : read_table(path, {"t", "phat", "stderr"})) {
    tailest::SurvivalPoint p;
    p.t = parse_double(cells[0], path);
    p.phat = parse_double(cells[1], path);
    p.stderr = parse_double(cells[2], path);
    p.boundary = p.phat <= 0.0 || p.phat >= 1.0;
    curve.push_back(p);
  }
  return curve;
}

std::vector<std::string> emit_plotdata(ResultRecord& record, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);

  std::vector<std::string> paths;
  for (const auto& [stem, rows] : record.tables) {
    const auto path = (base / (stem + ".csv")).string();
    write_long_csv(path, rows);
    paths.push_back(path);
  }
  for (const auto& [stem, curve] : record.survival) {
    const auto path = (base / (stem + ".csv")).string();
    write_survival_csv(path, curve);
    paths.push_back(path);
  }
  std::vector<SeriesPoint> metric_rows;
  for (const auto& [k, v] : record.metrics) metric_rows.push_back({k, 0.0, v, 0.0});
  const auto metrics_path = (base / "metrics.csv").string();
  write_long_csv(metrics_path, metric_rows);
  paths.push_back(metrics_path);

  record.artifacts.insert(record.artifacts.end(), paths.begin(), paths.end());
  return paths;
}

ResultRecord run(const ExperimentConfig& config) {
  ResultRecord record = execute(config);
  emit_plotdata(record, config.output_dir);
  const auto path = (std::filesystem::path(config.output_dir) / "record.json").string();
  record.artifacts.push_back(path);
  auto out = open_out(path);
  out << record_to_json(record) << '\n';
  finish(out, path);
  return record;
}

}  // namespace gmclab::expcli
