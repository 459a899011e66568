// Command-line front end: turboshape <subcommand> --config PATH [options].

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "turboshape/config.hpp"
#include "turboshape/errors.hpp"
#include "turboshape/run.hpp"

extern char** environ;

int main(int argc, char** argv) {
  using namespace turboshape;
  CLI::App app{"Reliability-driven shape optimization, thermal coupling and surrogate runs."};
  app.require_subcommand(1);
  std::string config, output;
  int threads = 0;
  bool verbose = false;
  app.add_option("--config", config, "run configuration file")->required()->envname("TURBOSHAPE_CONFIG");
  app.add_option("--output", output, "output directory (overrides run.output_dir)")->envname("TURBOSHAPE_OUTPUT");
  app.add_option("--threads", threads, "worker threads for sweeps and maps")
      ->check(CLI::PositiveNumber)
      ->envname("TURBOSHAPE_THREADS");
  app.add_flag("--verbose", verbose, "progress messages on stderr");
  const std::vector<std::pair<std::string, std::string>> subs{
      {"optimize", "weighted-sum descent for one weight"},
      {"pareto", "weight sweep and nondominated front"},
      {"thermal", "coupled channel/solid fixed-point iteration"},
      {"stability-map", "convergence verdicts over an (h, k) grid"},
      {"surrogate", "Kriging/GEK fit and expected-improvement loop"},
      {"check-gradients", "adjoint derivative against central finite differences"}};
  for (const auto& [name, help] : subs) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) {
      fmt::print(stderr, "{}\n", nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump());
      return kExitConfig;
    }
    return 0;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  std::vector<std::string> env;
  for (char** e = environ; *e; ++e) env.emplace_back(*e);

  RunConfig cfg;
  try {
    cfg = parse_config(config, env_overrides(env));
    if (to_string(cfg.subcommand) != sub) {
      throw ConfigError({fmt::format("run.subcommand is '{}' but '{}' was requested", to_string(cfg.subcommand), sub)});
    }
  } catch (const ConfigError& e) {
    const auto r = report_config_failure(output.empty() ? "output" : output, "run", sub, config, e.errors());
    fmt::print(stderr, "{}\n", r.error_line);
    return r.exit_code;
  }
  if (!output.empty()) cfg.output_dir = cfg.resolved["run.output_dir"] = output;
  if (threads > 0) {
    cfg.threads = threads;
    cfg.resolved["run.threads"] = std::to_string(threads);
  }
  try {
    const auto r = run(cfg, verbose);
    if (!r.error_line.empty()) fmt::print(stderr, "{}\n", r.error_line);
    if (verbose) fmt::print(stderr, "[turboshape] outputs in {}\n", r.run_dir);
    return r.exit_code;
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}\n", nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump());
    return kExitFailure;
  }
}
