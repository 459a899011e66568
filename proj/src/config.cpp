#include "turboshape/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "turboshape/errors.hpp"
#include "turboshape/io.hpp"

namespace turboshape {

namespace {

const std::vector<std::pair<Subcommand, std::string>> kSubcommands{
    {Subcommand::Optimize, "optimize"},         {Subcommand::Pareto, "pareto"},
    {Subcommand::Thermal, "thermal"},           {Subcommand::StabilityMap, "stability-map"},
    {Subcommand::Surrogate, "surrogate"},       {Subcommand::CheckGradients, "check-gradients"}};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw InvalidArgument("not a finite number: '" + s + "'");
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not an integer: '" + s + "'");
  }
  if (used != s.size()) throw InvalidArgument("not an integer: '" + s + "'");
  return v;
}

int to_int(const std::string& s, int lo) {
  const long long v = to_integer(s);
  if (v < lo || v > 1000000000) throw InvalidArgument(fmt::format("must be an integer >= {} (got {})", lo, s));
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidArgument("not a boolean: '" + s + "'");
}

std::vector<double> to_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  if (out.empty()) throw InvalidArgument("empty list");
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + format_number(x);
  return s;
}

double positive(double v, const char* what) {
  if (!(v > 0.0)) throw InvalidArgument(fmt::format("{} must be > 0", what));
  return v;
}

double nonnegative(double v, const char* what) {
  if (!(v >= 0.0)) throw InvalidArgument(fmt::format("{} must be >= 0", what));
  return v;
}

struct Key {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define NUM(sec, key, field, check)                                                            \
  Key {                                                                                        \
    sec, key, [](RunConfig& c, const std::string& s) { c.field = check(to_double(s), key); }, \
        [](const RunConfig& c) { return format_number(c.field); }                             \
  }
#define INT(sec, key, field, lo)                                                          \
  Key {                                                                                   \
    sec, key, [](RunConfig& c, const std::string& s) { c.field = to_int(s, lo); },        \
        [](const RunConfig& c) { return std::to_string(c.field); }                        \
  }

double any(double v, const char*) { return v; }

const std::vector<Key>& schema() {
  static const std::vector<Key> keys{
      {"run", "subcommand", [](RunConfig& c, const std::string& s) { c.subcommand = parse_subcommand(s); },
       [](const RunConfig& c) { return std::string(to_string(c.subcommand)); }},
      {"run", "output_dir", [](RunConfig& c, const std::string& s) { c.output_dir = s; },
       [](const RunConfig& c) { return c.output_dir; }},
      {"run", "run_id",
       [](RunConfig& c, const std::string& s) {
         if (s.empty() || s.find_first_of("/\\") != std::string::npos || s == "." || s == "..") {
           throw InvalidArgument("run_id must be a plain directory name");
         }
         c.run_id = s;
       },
       [](const RunConfig& c) { return c.run_id; }},
      {"run", "seed",
       [](RunConfig& c, const std::string& s) {
         const long long v = to_integer(s);
         if (v < 0) throw InvalidArgument("seed must be >= 0");
         c.seed = static_cast<std::uint64_t>(v);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      INT("run", "threads", threads, 1),

      // preset first so that the other geometry keys refine it
      {"geometry", "preset",
       [](RunConfig& c, const std::string& s) {
         if (s == "case_study") c.geometry = case_study_spec();
         else if (s == "coarse") c.geometry = coarse_bar_spec();
         else throw InvalidArgument("preset must be case_study or coarse");
       },
       [](const RunConfig& c) { return std::string(c.geometry.nx == 10 && c.geometry.ny == 6 ? "coarse" : "case_study"); }},
      INT("geometry", "nx", geometry.nx, 1),
      INT("geometry", "ny", geometry.ny, 1),
      NUM("geometry", "width", geometry.extent.x(), positive),
      NUM("geometry", "height", geometry.extent.y(), positive),
      NUM("geometry", "x0", geometry.x0, nonnegative),
      NUM("geometry", "length", geometry.length, positive),
      NUM("geometry", "y_lower", geometry.y_lower, nonnegative),
      NUM("geometry", "thickness", geometry.thickness, positive),
      NUM("geometry", "hump", geometry.hump, any),
      INT("geometry", "points_per_face", geometry.points_per_face, 2),

      {"elastic", "E",
       [](RunConfig& c, const std::string& s) {
         const double E = positive(to_double(s), "E (Pa)");
         c.structure.material = ElasticMaterial::from_young(E, c.structure.material.poisson(),
                                                            c.structure.material.kinematics);
       },
       [](const RunConfig& c) { return format_number(c.structure.material.young()); }},
      {"elastic", "nu",
       [](RunConfig& c, const std::string& s) {
         const double nu = to_double(s);
         if (!(nu > -1.0 && nu < 0.5)) throw InvalidArgument("nu must lie in (-1, 0.5)");
         c.structure.material = ElasticMaterial::from_young(c.structure.material.young(), nu,
                                                            c.structure.material.kinematics);
       },
       [](const RunConfig& c) { return format_number(c.structure.material.poisson()); }},
      {"elastic", "kinematics",
       [](RunConfig& c, const std::string& s) {
         if (s == "plane_stress") c.structure.material.kinematics = Kinematics::PlaneStress;
         else if (s == "plane_strain") c.structure.material.kinematics = Kinematics::PlaneStrain;
         else throw InvalidArgument("kinematics must be plane_stress or plane_strain");
       },
       [](const RunConfig& c) {
         return std::string(c.structure.material.kinematics == Kinematics::PlaneStress ? "plane_stress"
                                                                                       : "plane_strain");
       }},

      NUM("load", "traction_x", structure.load.traction.x(), any),
      NUM("load", "traction_y", structure.load.traction.y(), any),
      NUM("load", "body_x", structure.load.body_force.x(), any),
      NUM("load", "body_y", structure.load.body_force.y(), any),

      {"weibull", "m",
       [](RunConfig& c, const std::string& s) {
         const double m = to_double(s);
         if (!(m >= 1.0)) throw InvalidArgument(fmt::format("Weibull m ≥ 1 (got {})", s));
         c.structure.weibull.m = m;
       },
       [](const RunConfig& c) { return format_number(c.structure.weibull.m); }},
      NUM("weibull", "sigma0", structure.weibull.sigma0, positive),
      INT("weibull", "n_angles", structure.n_angles, 4),

      NUM("cmb", "E", cmb.E, positive),
      NUM("cmb", "sigma_f", cmb.sigma_f, positive),
      NUM("cmb", "eps_f", cmb.eps_f, positive),
      NUM("cmb", "b", cmb.b, any),
      NUM("cmb", "c", cmb.c, any),
      NUM("cmb", "m", cmb.m_lcf, positive),
      NUM("cmb", "c1", cmb.c1, nonnegative),
      NUM("cmb", "c2", cmb.c2, any),

      {"solver", "method",
       [](RunConfig& c, const std::string& s) {
         if (s == "direct") c.structure.solver.method = SolverOptions::Method::Direct;
         else if (s == "cg") c.structure.solver.method = SolverOptions::Method::ConjugateGradient;
         else throw InvalidArgument("method must be direct or cg");
       },
       [](const RunConfig& c) {
         return std::string(c.structure.solver.method == SolverOptions::Method::Direct ? "direct" : "cg");
       }},
      NUM("solver", "tol_lin", structure.solver.tol_lin, positive),
      INT("solver", "max_iter", structure.solver.max_iter, 1),

      NUM("metric", "lambda", metric.lambda, any),
      NUM("metric", "mu", metric.mu, positive),

      {"optimizer", "weights", [](RunConfig& c, const std::string& s) { c.weights = parse_weights(s); },
       [](const RunConfig& c) {
         std::string s;
         for (const auto& w : c.weights) s += (s.empty() ? "" : ", ") + format_number(w.w1) + ":" + format_number(w.w2);
         return s;
       }},
      NUM("optimizer", "c_armijo", descent.c_armijo, positive),
      NUM("optimizer", "rho", descent.rho, positive),
      NUM("optimizer", "initial_step", descent.initial_step, positive),
      NUM("optimizer", "max_step", descent.max_step, positive),
      INT("optimizer", "max_iter", descent.max_iter, 0),
      INT("optimizer", "max_backtracks", descent.max_backtracks, 0),
      NUM("optimizer", "grad_tol", descent.grad_tol, nonnegative),
      NUM("optimizer", "remesh_fraction", descent.remesh_fraction, positive),

      NUM("thermal", "h", thermal.slab.h, nonnegative),
      NUM("thermal", "k", thermal.slab.k, positive),
      NUM("thermal", "length", thermal.slab.length, positive),
      NUM("thermal", "height", thermal.slab.height, positive),
      INT("thermal", "n_cells", thermal.slab.n_cells, 1),
      INT("thermal", "nx", thermal.slab.nx, 1),
      INT("thermal", "ny", thermal.slab.ny, 1),
      NUM("thermal", "U_ext", thermal.slab.U_ext, positive),
      NUM("thermal", "w", thermal.w, positive),
      NUM("thermal", "T_in", thermal.T_in, positive),
      NUM("thermal", "p_in", thermal.p_in, positive),
      NUM("thermal", "relaxation", thermal.coupling.relaxation, positive),
      INT("thermal", "max_iter", thermal.coupling.max_iter, 1),
      NUM("thermal", "tol", thermal.coupling.tol, positive),
      {"thermal", "initial_guess",
       [](RunConfig& c, const std::string& s) {
         if (s == "lumped") c.thermal.coupling.initial_guess = InitialGuess::Lumped;
         else if (s == "inlet") c.thermal.coupling.initial_guess = InitialGuess::Inlet;
         else throw InvalidArgument("initial_guess must be lumped or inlet");
       },
       [](const RunConfig& c) {
         return std::string(c.thermal.coupling.initial_guess == InitialGuess::Lumped ? "lumped" : "inlet");
       }},
      {"thermal", "h_list",
       [](RunConfig& c, const std::string& s) {
         c.thermal.h_list = to_list(s);
         for (double h : c.thermal.h_list) nonnegative(h, "h_list entries");
       },
       [](const RunConfig& c) { return list_str(c.thermal.h_list); }},
      {"thermal", "k_list",
       [](RunConfig& c, const std::string& s) {
         c.thermal.k_list = to_list(s);
         for (double k : c.thermal.k_list) positive(k, "k_list entries");
       },
       [](const RunConfig& c) { return list_str(c.thermal.k_list); }},

      {"surrogate", "function",
       [](RunConfig& c, const std::string& s) {
         if (s != "forrester" && s != "sin") throw InvalidArgument("function must be forrester or sin");
         c.surrogate.function = s;
       },
       [](const RunConfig& c) { return c.surrogate.function; }},
      {"surrogate", "training_file", [](RunConfig& c, const std::string& s) { c.surrogate.training_file = s; },
       [](const RunConfig& c) { return c.surrogate.training_file; }},
      {"surrogate", "use_gradients", [](RunConfig& c, const std::string& s) { c.surrogate.use_gradients = to_bool(s); },
       [](const RunConfig& c) { return std::string(c.surrogate.use_gradients ? "true" : "false"); }},
      INT("surrogate", "n_initial", surrogate.n_initial, 2),
      INT("surrogate", "n_iter", surrogate.n_iter, 0),
      INT("surrogate", "n_candidates", surrogate.n_candidates, 2),
      INT("surrogate", "n_starts", surrogate.fit.n_starts, 1),
      NUM("surrogate", "nugget", surrogate.fit.nugget, positive),

      INT("check", "n_directions", check.n_directions, 1),
      NUM("check", "step_fraction", check.step_fraction, positive),
      NUM("check", "tol", check.tol, positive),
  };
  return keys;
}

#undef NUM
#undef INT

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

void cross_validate(RunConfig& c, std::vector<std::string>& errors, bool weights_given) {
  auto guard = [&](const char* what, const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      errors.push_back(fmt::format("{}: {}", what, e.what()));
    }
  };
  const auto& g = c.geometry;
  if (g.x0 + g.length > g.origin.x() + g.extent.x() || g.y_lower + g.thickness + std::abs(g.hump) > g.extent.y()) {
    errors.push_back("geometry: bar does not fit into the hold-all");
  }
  if (!(g.hump_begin < g.hump_end)) errors.push_back("geometry: empty hump support");
  guard("optimizer", [&] { c.descent.validate(); });
  guard("metric", [&] { c.metric.validate(); });
  guard("cmb", [&] { c.cmb.validate(); });
  guard("thermal", [&] { c.thermal.coupling.validate(); });
  if (c.thermal.coupling.relaxation > 1.0) errors.push_back("thermal.relaxation: must be <= 1");
  if (!weights_given) {
    c.weights = c.subcommand == Subcommand::Pareto ? parse_weights("0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9")
                                                   : parse_weights("0.5");
  }
  if (c.subcommand == Subcommand::Optimize && c.weights.size() != 1) {
    errors.push_back("optimizer.weights: optimize takes exactly one weight");
  }
  if (c.surrogate.n_initial > c.surrogate.n_candidates) {
    errors.push_back("surrogate: n_initial exceeds n_candidates");
  }
}

}  // namespace

const char* to_string(Subcommand s) {
  for (const auto& [k, name] : kSubcommands) {
    if (k == s) return name.c_str();
  }
  return "?";
}

Subcommand parse_subcommand(const std::string& s) {
  for (const auto& [k, name] : kSubcommands) {
    if (name == s) return k;
  }
  throw InvalidArgument("unknown subcommand '" + s + "'");
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& p : kSubcommands) v.push_back(p.second);
    return v;
  }();
  return names;
}

std::vector<WeightVector> parse_weights(const std::string& s) {
  std::vector<WeightVector> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    double a = 0.0, b = 0.0;
    if (colon == std::string::npos) {
      a = to_double(item);
      if (a < 0.0 || a > 1.0) throw InvalidArgument("single weight must lie in [0, 1]");
      b = 1.0 - a;
    } else {
      a = to_double(trim(item.substr(0, colon)));
      b = to_double(trim(item.substr(colon + 1)));
    }
    out.push_back(WeightVector::normalized(a, b));
  }
  if (out.empty()) throw InvalidArgument("empty weight list");
  return out;
}

Overrides env_overrides(const std::vector<std::string>& environ_entries) {
  static const std::string prefix = "TURBOSHAPE_";
  // consumed by the command-line front end itself
  static const std::set<std::string> flags{"CONFIG", "OUTPUT", "THREADS", "VERBOSE"};
  Overrides out;
  for (const auto& e : environ_entries) {
    if (e.rfind(prefix, 0) != 0) continue;
    const auto eq = e.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = e.substr(prefix.size(), eq - prefix.size());
    if (flags.count(name)) continue;
    out[name] = e.substr(eq + 1);
  }
  return out;
}

RunConfig parse_config_text(const std::string& text, const Overrides& overrides, const std::string& base_dir) {
  std::vector<std::string> errors;
  // '#' comments are accepted besides the ';' of the INI format
  std::string cleaned;
  {
    std::stringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      cleaned += (!t.empty() && t[0] == '#' ? ";" + t : line) + '\n';
    }
  }
  boost::property_tree::ptree tree;
  try {
    std::stringstream in(cleaned);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
  }

  std::map<std::string, std::map<std::string, std::string>> values;
  std::set<std::string> known_sections;
  for (const auto& k : schema()) known_sections.insert(k.section);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      errors.push_back(fmt::format("key '{}' outside of a section", section));
      continue;
    }
    if (!known_sections.count(section)) {
      errors.push_back(fmt::format("unknown section [{}]", section));
      continue;
    }
    for (const auto& [key, v] : body) values[section][key] = trim(v.data());
  }
  for (const auto& [name, v] : overrides) {
    bool found = false;
    for (const auto& k : schema()) {
      if (upper(k.section + "_" + k.name) == name) {
        values[k.section][k.name] = trim(v);
        found = true;
        break;
      }
    }
    if (!found) errors.push_back(fmt::format("unknown environment override TURBOSHAPE_{}", name));
  }
  if (!values.count("run")) errors.push_back("missing section [run]");
  else if (!values["run"].count("subcommand")) errors.push_back("run.subcommand: missing");

  RunConfig cfg;
  std::set<std::pair<std::string, std::string>> used;
  for (const auto& k : schema()) {
    const auto s = values.find(k.section);
    if (s == values.end()) continue;
    const auto v = s->second.find(k.name);
    if (v == s->second.end()) continue;
    used.insert({k.section, k.name});
    try {
      k.set(cfg, v->second);
    } catch (const Error& e) {
      errors.push_back(fmt::format("{}.{}: {}", k.section, k.name, e.what()));
    }
  }
  for (const auto& [section, body] : values) {
    for (const auto& [key, v] : body) {
      if (!used.count({section, key})) errors.push_back(fmt::format("unknown key '{}' in [{}]", key, section));
    }
  }
  if (!cfg.surrogate.training_file.empty()) {
    std::filesystem::path p(cfg.surrogate.training_file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (!std::filesystem::is_regular_file(p)) {
      errors.push_back(fmt::format("surrogate.training_file: '{}' does not exist", p.string()));
    }
    cfg.surrogate.training_file = p.lexically_normal().string();
  }
  cross_validate(cfg, errors, used.count({"optimizer", "weights"}) > 0);
  if (!errors.empty()) throw ConfigError(errors);
  for (const auto& k : schema()) cfg.resolved[k.section + "." + k.name] = k.get(cfg);
  return cfg;
}

RunConfig parse_config(const std::string& path, const Overrides& overrides) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError({e.what()});
  }
  return parse_config_text(text, overrides, std::filesystem::path(path).parent_path().string());
}

ChannelGeometry thermal_channel(const ThermalSettings& t) {
  ChannelGeometry g = reference_channel(t.slab);
  g.w = t.w;
  g.T_in = t.T_in;
  g.p_in = t.p_in;
  return g;
}

}  // namespace turboshape
