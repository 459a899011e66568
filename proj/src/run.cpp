#include "turboshape/run.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <numbers>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/opensslv.h>

#include "turboshape/errors.hpp"
#include "turboshape/io.hpp"

#ifndef TURBOSHAPE_VERSION
#define TURBOSHAPE_VERSION "unknown"
#endif

namespace turboshape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class RunContext {
 public:
  RunContext(const RunConfig& cfg, bool verbose) : cfg_(cfg), verbose_(verbose) {
    dir_ = (fs::path(cfg.output_dir) / cfg.run_id).string();
    fs::create_directories(dir_);
  }

  const RunConfig& cfg() const { return cfg_; }
  const std::string& dir() const { return dir_; }
  json summary = json::object();
  std::vector<std::string> outputs;
  json stages = json::object();

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void csv(const std::string& name, const CsvTable& t) {
    t.write(path(name));
    outputs.push_back(name);
  }
  void vtk(const std::string& name, const AdaptedMesh& mesh, const std::string& title, const VtkFields& f = {}) {
    write_vtk(path(name), mesh, title, f);
    outputs.push_back(name);
  }
  void text(const std::string& name, const std::string& body) {
    write_text(path(name), body);
    outputs.push_back(name);
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    log("{} ...", name);
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      stages[name] = s;
      log("{} done in {:.3f} s", name, s);
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }

  template <class... A>
  void log(fmt::format_string<A...> f, A&&... a) const {
    if (verbose_) fmt::print(stderr, "[turboshape] {}\n", fmt::format(f, std::forward<A>(a)...));
  }

 private:
  const RunConfig& cfg_;
  bool verbose_;
  std::string dir_;
};

json number(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

json versions() {
  return {{"turboshape", TURBOSHAPE_VERSION},
          {"compiler", fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__)},
          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"fmt", FMT_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT}};
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AdaptedMesh start_mesh(const RunConfig& cfg) {
  return adapt_to_boundary(bar_grid(cfg.geometry), bar_curve(cfg.geometry));
}

VtkFields design_fields(const AdaptedMesh& mesh, const StructuralProblem& prob, const Eigen::VectorXd& u) {
  VtkFields f;
  const auto stress = compute_stress(mesh, prob.material, u);
  std::vector<double> vm(mesh.grid.triangle_count(), 0.0), dens(mesh.grid.triangle_count(), 0.0);
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    vm[t] = von_mises(stress.sigma[t]);
    dens[t] = weibull_density(stress.sigma[t], prob.weibull, prob.n_angles);
  }
  f.cell_scalars["von_mises"] = vm;
  f.cell_scalars["weibull_density"] = dens;
  f.point_vectors["displacement"] = u;
  return f;
}

CsvTable curve_table(const BoundaryCurve& c) {
  CsvTable t({"x", "y", "tag"});
  for (int i = 0; i < c.size(); ++i) {
    t.row({format_number(c.point(i).x()), format_number(c.point(i).y()), to_string(c.tag(i))});
  }
  return t;
}

/// Start design with the raw weighted sensitivity and its metric representation.
void write_start(RunContext& ctx, const AdaptedMesh& mesh, const Evaluation& ev, const WeightVector& w) {
  const auto& cfg = ctx.cfg();
  const Eigen::VectorXd raw = w.w1 / ev.J1 * ev.dJ1 + w.w2 / ev.J2 * ev.dJ2;
  const Eigen::VectorXd smooth = represent_gradient(mesh, raw, cfg.metric);
  auto f = design_fields(mesh, cfg.structure, ev.u);
  f.point_vectors["raw_gradient"] = raw;
  f.point_vectors["represented_gradient"] = smooth;
  ctx.vtk("start.vtk", mesh, "start design with raw and represented shape gradient", f);
}

json lcf_summary(const AdaptedMesh& mesh, const RunConfig& cfg, const Eigen::VectorXd& u) {
  const auto r = lcf_functional(mesh, cfg.structure.material, u, cfg.cmb);
  return {{"J_R", number(r.J_R)}, {"eta", number(r.eta)}, {"strain_rule", r.strain_rule}};
}

int run_optimize(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto mesh = ctx.stage("adapt", [&] { return start_mesh(cfg); });
  const auto ev = ctx.stage("evaluate start", [&] { return evaluate(mesh, cfg.structure); });
  const WeightVector w = cfg.weights.front();
  write_start(ctx, mesh, ev, w);
  const auto r = ctx.stage("descent", [&] {
    return descent_loop(mesh, w, cfg.descent, cfg.structure, cfg.metric, {ev.J1, ev.J2});
  });
  ctx.csv("iterations.csv", iteration_table(r.log));
  const auto fin = evaluate(r.mesh, cfg.structure, false);
  ctx.vtk("final.vtk", r.mesh, "optimized design", design_fields(r.mesh, cfg.structure, fin.u));
  ctx.csv("boundary.csv", curve_table(r.mesh.implied_curve()));
  const double xm = cfg.geometry.x0 + 0.5 * cfg.geometry.length;
  ctx.summary = {{"omega1", w.w1},
                 {"omega2", w.w2},
                 {"J1_start", ev.J1},
                 {"J2_start", ev.J2},
                 {"J1", r.J1},
                 {"J2", r.J2},
                 {"iterations", r.log.empty() ? 0 : r.log.back().iteration},
                 {"stop_reason", r.stop_reason},
                 {"mid_thickness", number(thickness_at(r.mesh, xm))},
                 {"lcf", lcf_summary(r.mesh, cfg, fin.u)}};
  return kExitOk;
}

int run_pareto(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto mesh = ctx.stage("adapt", [&] { return start_mesh(cfg); });
  const auto ev = ctx.stage("evaluate start", [&] { return evaluate(mesh, cfg.structure); });
  write_start(ctx, mesh, ev, WeightVector{0.5, 0.5});
  const double xm = cfg.geometry.x0 + 0.5 * cfg.geometry.length;
  const auto archive = ctx.stage("sweep", [&] {
    return front_sweep(mesh, cfg.weights, cfg.descent, cfg.structure, cfg.metric, cfg.threads, xm);
  });
  ctx.csv("front.csv", front_table(archive));
  const auto& recs = archive.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ctx.csv(fmt::format("iterations_{:02d}.csv", i), iteration_table(recs[i].log));
    const auto fin = evaluate(recs[i].mesh, cfg.structure, false);
    ctx.vtk(fmt::format("design_{:02d}.vtk", i), recs[i].mesh,
            fmt::format("design for omega1 = {}", format_number(recs[i].weight.w1)),
            design_fields(recs[i].mesh, cfg.structure, fin.u));
  }
  ctx.summary = {{"weights", cfg.weights.size()},
                 {"records", recs.size()},
                 {"mutually_nondominated", archive.mutually_nondominated()},
                 {"failures", archive.failures}};
  if (recs.empty()) throw Error("no weight produced a design");
  return kExitOk;
}

int run_thermal(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto geom = thermal_channel(cfg.thermal);
  const auto prob = slab_problem(cfg.thermal.slab);
  const auto r = ctx.stage("coupling", [&] { return couple_iterate(geom, prob, cfg.thermal.coupling); });
  ctx.csv("history.csv", coupling_table(r.state));
  ctx.csv("channel.csv", channel_table(r.channel, geom));
  VtkFields f;
  f.point_scalars["temperature"] = r.U;
  ctx.vtk("temperature.vtk", r.problem.mesh, "solid temperature at the last iteration", f);
  ctx.summary = {{"h", cfg.thermal.slab.h},
                 {"k", cfg.thermal.slab.k},
                 {"verdict", to_string(r.verdict)},
                 {"iterations", r.state.iteration},
                 {"rate", number(r.rate)},
                 {"reason", r.reason},
                 {"outlet_T", number(r.channel.T.empty() ? NAN : r.channel.outlet_T())},
                 {"energy_balance", number(energy_balance(r.channel, r.U, r.problem, geom))}};
  return kExitOk;
}

int run_stability(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto geom = thermal_channel(cfg.thermal);
  const auto prob = slab_problem(cfg.thermal.slab);
  const auto m = ctx.stage("map", [&] {
    return stability_map(geom, prob, cfg.thermal.h_list, cfg.thermal.k_list, cfg.thermal.coupling, cfg.threads);
  });
  ctx.csv("stability.csv", stability_table(m));
  json crit = json::array();
  for (std::size_t i = 0; i < m.h.size(); ++i) crit.push_back({{"h", m.h[i]}, {"critical_k", number(m.critical_k[i])}});
  ctx.summary = {{"critical_k", crit}, {"monotone", m.monotone}};
  return kExitOk;
}

double forrester(double x) { return std::pow(6.0 * x - 2.0, 2) * std::sin(12.0 * x - 4.0); }
double forrester_dx(double x) {
  return 12.0 * (6.0 * x - 2.0) * std::sin(12.0 * x - 4.0) + 12.0 * std::pow(6.0 * x - 2.0, 2) * std::cos(12.0 * x - 4.0);
}

int run_surrogate_file(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto table = read_csv(cfg.surrogate.training_file);
  std::vector<int> xs, gs;
  int yc = -1;
  for (std::size_t c = 0; c < table.header().size(); ++c) {
    const auto& h = table.header()[c];
    if (h == "y") yc = static_cast<int>(c);
    else if (h.size() > 1 && h[0] == 'x') xs.push_back(static_cast<int>(c));
    else if (h.size() > 1 && h[0] == 'g') gs.push_back(static_cast<int>(c));
    else throw InvalidArgument("training file: unexpected column '" + h + "'");
  }
  if (yc < 0 || xs.empty()) throw InvalidArgument("training file needs x1.. and y columns");
  if (!gs.empty() && gs.size() != xs.size()) throw InvalidArgument("training file: one gradient column per x column");
  auto num = [](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidArgument("training file: bad number '" + s + "'");
    return v;
  };
  TrainingSet data;
  for (const auto& row : table.rows()) {
    Eigen::VectorXd x(xs.size()), g(gs.size());
    for (std::size_t a = 0; a < xs.size(); ++a) x[a] = num(row[xs[a]]);
    for (std::size_t a = 0; a < gs.size(); ++a) g[a] = num(row[gs[a]]);
    data.x.push_back(x);
    data.y.push_back(num(row[yc]));
    if (!gs.empty()) data.grad.push_back(g);
  }
  FitOptions opt = cfg.surrogate.fit;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  const bool grads = cfg.surrogate.use_gradients && data.has_gradients();
  const auto model = ctx.stage("fit", [&] { return KrigingModel::fit(data, grads, opt); });
  model.save(ctx.path("model.json"));
  ctx.outputs.push_back("model.json");
  CsvTable t({"index", "y", "mean", "sd"});
  for (int i = 0; i < data.size(); ++i) {
    const auto p = model.predict(data.x[i]);
    t.row({std::to_string(i), format_number(data.y[i]), format_number(p.mean), format_number(p.sd)});
  }
  ctx.csv("training_fit.csv", t);
  ctx.summary = {{"samples", data.size()},
                 {"dim", data.dim()},
                 {"uses_gradients", grads},
                 {"log_likelihood", model.log_likelihood()},
                 {"warnings", model.warnings()}};
  return kExitOk;
}

int run_surrogate(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  if (!cfg.surrogate.training_file.empty()) return run_surrogate_file(ctx);
  const auto& s = cfg.surrogate;
  const bool is_sin = s.function == "sin";
  const double lo = 0.0, hi = is_sin ? 2.0 * std::numbers::pi : 1.0;
  auto f = [&](double x) { return is_sin ? std::sin(x) : forrester(x); };
  auto df = [&](double x) { return is_sin ? std::cos(x) : forrester_dx(x); };
  auto grid = [&](int n) {
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < n; ++i) v.push_back(Eigen::VectorXd::Constant(1, lo + (hi - lo) * i / (n - 1)));
    return v;
  };
  FitOptions opt = s.fit;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  const auto cand = grid(s.n_candidates);
  const auto loop = ctx.stage("ei loop", [&] {
    return ei_loop([&](const Eigen::VectorXd& x) { return f(x[0]); }, grid(s.n_initial), cand, s.n_iter, opt);
  });
  CsvTable samples({"index", "x", "y"});
  for (int i = 0; i < loop.data.size(); ++i) {
    samples.row({std::to_string(i), format_number(loop.data.x[i][0]), format_number(loop.data.y[i])});
  }
  ctx.csv("samples.csv", samples);

  TrainingSet data = loop.data;
  for (const auto& x : data.x) data.grad.push_back(Eigen::VectorXd::Constant(1, df(x[0])));
  const auto plain = ctx.stage("fit plain", [&] { return KrigingModel::fit(data, false, opt); });
  const auto gek = ctx.stage("fit gek", [&] { return KrigingModel::fit(data, true, opt); });
  const auto& model = s.use_gradients ? gek : plain;
  model.save(ctx.path("model.json"));
  ctx.outputs.push_back("model.json");

  CsvTable pred({"x", "truth", "mean", "sd", "mean_plain", "mean_gek"});
  double e_plain = 0.0, e_gek = 0.0, fmin = INFINITY, xmin = 0.0;
  for (const auto& x : cand) {
    const double t = f(x[0]);
    const auto p = model.predict(x);
    const double mp = plain.predict(x).mean, mg = gek.predict(x).mean;
    e_plain += (mp - t) * (mp - t);
    e_gek += (mg - t) * (mg - t);
    if (t < fmin) {
      fmin = t;
      xmin = x[0];
    }
    pred.row({format_number(x[0]), format_number(t), format_number(p.mean), format_number(p.sd), format_number(mp),
              format_number(mg)});
  }
  ctx.csv("predictions.csv", pred);
  const double n = static_cast<double>(cand.size());
  ctx.summary = {{"function", s.function},
                 {"samples", loop.data.size()},
                 {"best_x", loop.data.x[loop.best_index][0]},
                 {"best_y", loop.data.y[loop.best_index]},
                 {"grid_minimum_x", xmin},
                 {"grid_minimum_y", fmin},
                 {"rmse_plain", std::sqrt(e_plain / n)},
                 {"rmse_gek", std::sqrt(e_gek / n)},
                 {"uses_gradients", s.use_gradients}};
  return kExitOk;
}

int run_check(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto mesh = ctx.stage("adapt", [&] { return start_mesh(cfg); });
  const auto rep = ctx.stage("fd check", [&] {
    return check_gradient_fd(mesh, cfg.structure, cfg.check.n_directions, cfg.seed,
                             cfg.check.step_fraction * mesh.grid.mesh_size());
  });
  CsvTable t({"direction", "adjoint", "finite_difference", "best_step", "plateau_error", "pass"});
  CsvTable steps({"direction", "step", "relative_error"});
  bool ok = true;
  for (std::size_t i = 0; i < rep.checks.size(); ++i) {
    const auto& c = rep.checks[i];
    const bool pass = c.plateau_error <= cfg.check.tol;
    ok = ok && pass;
    t.row({std::to_string(i), format_number(c.directional_adjoint), format_number(c.directional_fd),
           format_number(c.best_step), format_number(c.plateau_error), pass ? "1" : "0"});
    for (std::size_t k = 0; k < c.steps.size(); ++k) {
      steps.row({std::to_string(i), format_number(c.steps[k]), format_number(c.errors[k])});
    }
  }
  ctx.csv("gradient_check.csv", t);
  ctx.csv("gradient_steps.csv", steps);
  ctx.summary = {{"directions", rep.checks.size()},
                 {"max_plateau_error", rep.max_error},
                 {"tolerance", cfg.check.tol},
                 {"passed", ok}};
  if (!ok) {
    throw Error(fmt::format("gradient check failed: max plateau error {} > {}", format_number(rep.max_error),
                            format_number(cfg.check.tol)));
  }
  return kExitOk;
}

json error_json(const std::string& kind, const std::string& message, const std::string& subcommand,
                const std::string& run_id) {
  return {{"error", kind}, {"message", message}, {"subcommand", subcommand}, {"run_id", run_id}};
}

void write_manifest(const std::string& dir, const json& body, const std::vector<std::string>& outputs,
                    const json& timing) {
  json m = body;
  json files = json::array();
  for (const auto& name : outputs) {
    const auto p = fs::path(dir) / name;
    files.push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p.string())}});
  }
  m["outputs"] = files;
  m["timing"] = timing;
  write_text((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

}  // namespace

RunResult run(const RunConfig& cfg, bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  RunResult result;
  RunContext ctx(cfg, verbose);
  result.run_dir = ctx.dir();
  json status = "ok";
  json error = nullptr;
  try {
    switch (cfg.subcommand) {
      case Subcommand::Optimize: result.exit_code = run_optimize(ctx); break;
      case Subcommand::Pareto: result.exit_code = run_pareto(ctx); break;
      case Subcommand::Thermal: result.exit_code = run_thermal(ctx); break;
      case Subcommand::StabilityMap: result.exit_code = run_stability(ctx); break;
      case Subcommand::Surrogate: result.exit_code = run_surrogate(ctx); break;
      case Subcommand::CheckGradients: result.exit_code = run_check(ctx); break;
    }
  } catch (const Error& e) {
    const bool check = cfg.subcommand == Subcommand::CheckGradients && ctx.summary.contains("passed");
    result.exit_code = check ? kExitCheckFailed : kExitFailure;
    error = error_json(e.kind(), e.what(), to_string(cfg.subcommand), cfg.run_id);
  } catch (const std::exception& e) {
    result.exit_code = kExitFailure;
    error = error_json("internal", e.what(), to_string(cfg.subcommand), cfg.run_id);
  }
  if (!error.is_null()) {
    status = "failed";
    result.error_line = error.dump();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json body = {{"format", "turboshape-manifest"},
                     {"version", 1},
                     {"subcommand", to_string(cfg.subcommand)},
                     {"run_id", cfg.run_id},
                     {"status", status},
                     {"exit_code", result.exit_code},
                     {"error", error},
                     {"config", cfg.resolved},
                     {"versions", versions()},
                     {"summary", ctx.summary}};
  write_manifest(ctx.dir(), body, ctx.outputs, {{"started_utc", started}, {"wall_clock_s", wall}, {"stages", ctx.stages}});
  result.outputs = ctx.outputs;
  return result;
}

RunResult report_config_failure(const std::string& output_dir, const std::string& run_id,
                                const std::string& subcommand, const std::string& config_path,
                                const std::vector<std::string>& errors) {
  RunResult result;
  result.exit_code = kExitConfig;
  std::string msg;
  for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
  json err = error_json("config", msg, subcommand, run_id);
  err["errors"] = errors;
  result.error_line = err.dump();
  try {
    result.run_dir = (fs::path(output_dir) / run_id).string();
    fs::create_directories(result.run_dir);
    const json body = {{"format", "turboshape-manifest"},
                       {"version", 1},
                       {"subcommand", subcommand},
                       {"run_id", run_id},
                       {"status", "failed"},
                       {"exit_code", result.exit_code},
                       {"error", err},
                       {"config_path", config_path},
                       {"versions", versions()}};
    write_manifest(result.run_dir, body, {}, {{"started_utc", utc_now()}});
  } catch (const std::exception&) {
    // nowhere to write: the error line on stderr is all that remains
    result.run_dir.clear();
  }
  return result;
}

}  // namespace turboshape
