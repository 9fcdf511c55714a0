#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "gmclab/error.hpp"
#include "gmclab/expcli.hpp"

namespace ex = gmclab::expcli;

int main(int argc, char** argv) {
  CLI::App app{"Tail experiments for boundary Gaussian multiplicative chaos"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  bool dump = false;

  for (ex::Experiment e : ex::all_experiments()) {
    auto* sub = app.add_subcommand(std::string(ex::to_string(e)));
    sub->add_option("--config", config_path, "JSON configuration; missing keys use the defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed (overrides the configuration)");
    sub->add_option("--out", out, "Output directory (overrides the configuration)");
    sub->add_option("--threads", threads, "Worker threads (default: GMCLAB_THREADS or 1)");
    sub->add_flag("--dump-config", dump, "Print the effective configuration and exit");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const auto name = app.get_subcommands().front()->get_name();
    const ex::Experiment experiment = ex::parse_experiment(name);
    ex::ExperimentConfig config = config_path ? ex::load_config(*config_path) : ex::default_config(experiment);
    if (config.experiment != experiment) {
      throw gmclab::Error(gmclab::ErrorCode::ConfigInvalid,
                          "config is for '" + std::string(ex::to_string(config.experiment)) + "', not '" + name + "'");
    }
    if (seed) config.seed = *seed;
    if (out) config.output_dir = *out;
    if (threads) config.threads = *threads;
    config.validate();

    if (dump) {
      std::cout << ex::config_to_json(config) << '\n';
      return 0;
    }

    const ex::ResultRecord record = ex::run(config);
    for (const auto& a : record.assertions) {
      std::cout << (a.passed ? "PASS " : "FAIL ") << a.name;
      if (!a.detail.empty()) std::cout << " (" << a.detail << ')';
      std::cout << '\n';
    }
    std::cout << "record: " << config.output_dir << "/record.json  hash " << record.config_hash << "  "
              << record.wall_time << " s\n";
    return record.all_passed() ? 0 : 1;
  } catch (const gmclab::Error& e) {
    std::cerr << "gmclab: " << gmclab::to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gmclab: " << e.what() << '\n';
    return 2;
  }
}
