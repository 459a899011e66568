#pragma once

// Run configuration: a sectioned key = value text file parsed strictly.
// Every unknown section or key, malformed value and range violation is
// collected and reported together in one ConfigError.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "turboshape/adjoint.hpp"
#include "turboshape/case_study.hpp"
#include "turboshape/failure.hpp"
#include "turboshape/optimizer.hpp"
#include "turboshape/representation.hpp"
#include "turboshape/surrogate.hpp"
#include "turboshape/thermal.hpp"

namespace turboshape {

enum class Subcommand { Optimize, Pareto, Thermal, StabilityMap, Surrogate, CheckGradients };

const char* to_string(Subcommand s);
Subcommand parse_subcommand(const std::string& s);
const std::vector<std::string>& subcommand_names();

struct ThermalSettings {
  SlabConfig slab;
  double w = 6.2e-4;
  double T_in = 600.0;
  double p_in = 1e6;
  CouplingOptions coupling;
  std::vector<double> h_list{1000.0, 5000.0};
  std::vector<double> k_list{10.0, 25.0, 40.0, 60.0};
};

struct SurrogateSettings {
  /// Built-in test function (forrester, sin) or empty when training_file is used.
  std::string function = "forrester";
  std::string training_file;
  bool use_gradients = true;
  int n_initial = 5;
  int n_iter = 10;
  int n_candidates = 2001;
  FitOptions fit;
};

struct GradientCheckSettings {
  int n_directions = 20;
  /// Largest finite-difference step as a fraction of the mesh size.
  double step_fraction = 1e-3;
  double tol = 1e-4;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::Optimize;
  std::string output_dir = "output";
  std::string run_id = "run";
  std::uint64_t seed = 1;
  int threads = 1;

  BarSpec geometry = case_study_spec();
  StructuralProblem structure = case_study_problem();
  CMBParams cmb;
  MetricParams metric;
  DescentConfig descent;
  /// Normalized to w1 + w2 = 1.
  std::vector<WeightVector> weights;
  ThermalSettings thermal;
  SurrogateSettings surrogate;
  GradientCheckSettings check;

  /// Every key with its resolved value, including defaults, as "section.key".
  std::map<std::string, std::string> resolved;
};

/// Environment variables named TURBOSHAPE_<SECTION>_<KEY> override file values.
using Overrides = std::map<std::string, std::string>;
Overrides env_overrides(const std::vector<std::string>& environ_entries);

RunConfig parse_config_text(const std::string& text, const Overrides& overrides = {},
                            const std::string& base_dir = ".");
/// Relative file references resolve against the directory of the config file.
RunConfig parse_config(const std::string& path, const Overrides& overrides = {});

/// Parse "a:b" pairs or single w1 values (w2 = 1 - w1) separated by commas.
std::vector<WeightVector> parse_weights(const std::string& s);

ChannelGeometry thermal_channel(const ThermalSettings& t);

}  // namespace turboshape
