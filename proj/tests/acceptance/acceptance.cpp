// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "turboshape/adjoint.hpp"
#include "turboshape/case_study.hpp"
#include "turboshape/config.hpp"
#include "turboshape/elasticity.hpp"
#include "turboshape/failure.hpp"
#include "turboshape/io.hpp"
#include "turboshape/optimizer.hpp"
#include "turboshape/representation.hpp"
#include "turboshape/run.hpp"
#include "turboshape/surrogate.hpp"
#include "turboshape/thermal.hpp"

using namespace turboshape;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  fmt::print("{} {:2d} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, s);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AdaptedMesh bar_mesh(const BarSpec& spec) { return adapt_to_boundary(bar_grid(spec), bar_curve(spec)); }

Outcome adjoint_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t dirs = 0;
  for (const auto& spec : {coarse_bar_spec(), case_study_spec()}) {
    const auto m = bar_mesh(spec);
    const auto rep = check_gradient_fd(m, case_study_problem(), 20, 2024, 1e-3 * m.grid.mesh_size());
    worst = std::max(worst, rep.max_error);
    dirs += rep.checks.size();
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && dirs == 40 && t < 120.0,
          fmt::format("max plateau error {:.2e} over {} directions (10x6, 45x25), {:.1f} s", worst, dirs, t)};
}

AdaptedMesh unit_square() {
  using T = BoundaryTag;
  return adapt_to_boundary(build_grid(8, 8, {0, 0}, {1, 1}),
                           BoundaryCurve({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {T::NeumannFree, T::NeumannFixed,
                                                                             T::NeumannFree, T::Dirichlet}));
}

Outcome weibull_oracle() {
  const auto m = unit_square();
  const WeibullParams p{5.0, 200.0};
  StressField f;
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  s(0, 0) = p.sigma0;
  f.sigma.assign(m.grid.triangle_count(), s);
  f.strain.assign(m.grid.triangle_count(), Eigen::Matrix2d::Zero());
  const double J = weibull_functional(m, f, p, 64);
  const double err = std::abs(J - 63.0 / 256.0);
  return {err <= 1e-8, fmt::format("J1 = {} vs 63/256, error {:.1e}", format_number(J), err)};
}

Outcome load_homogeneity() {
  const auto m = bar_mesh(case_study_spec());
  const auto prob = case_study_problem();
  auto J = [&](double t) {
    LoadCase l = prob.load;
    l.traction *= t;
    l.body_force *= t;
    const auto u = solve_displacement(assemble(m, prob.material, l), prob.solver);
    return weibull_functional(m, compute_stress(m, prob.material, u), prob.weibull, prob.n_angles);
  };
  const double J0 = J(1.0);
  double worst = 0.0;
  for (double t : {0.5, 2.0, 10.0}) worst = std::max(worst, std::abs(J(t) / (std::pow(t, 5) * J0) - 1.0));
  return {worst <= 1e-10, fmt::format("max relative deviation from t^5 scaling {:.1e}", worst)};
}

int sign_changes(const std::vector<double>& x, double ref) {
  int c = 0;
  for (std::size_t i = 1; i < x.size(); ++i) c += (x[i] - ref) * (x[i - 1] - ref) < 0.0;
  return c;
}

Outcome thermal_loop() {
  const auto t0 = std::chrono::steady_clock::now();
  SlabConfig a;
  a.h = 5000.0;
  a.k = 25.0;
  const auto ga = reference_channel(a);
  const auto ra = couple_iterate(ga, slab_problem(a));
  const auto& e = ra.state.error;
  const std::vector<double> earlier(e.begin(), e.end() - std::min<std::size_t>(10, e.size()));
  const double prev_rate = estimate_rate(earlier, 10);
  const double balance = energy_balance(ra.channel, ra.U, ra.problem, ga);
  const int osc_a = sign_changes(ra.state.outlet_T, ra.state.outlet_T.back());
  const bool conv = ra.verdict == Verdict::Converged && ra.rate > 0.0 && ra.rate < 1.0 &&
                    std::abs(prev_rate - ra.rate) < 0.05 && osc_a >= 10 && balance <= 1e-6;

  SlabConfig b = a;
  b.k = 40.0;
  const auto rb = couple_iterate(reference_channel(b), slab_problem(b));
  const int osc_b = sign_changes(rb.state.outlet_T, rb.state.outlet_T.front());
  const bool div = rb.verdict == Verdict::Diverged && rb.rate > 1.0 && osc_b >= 4;
  const double t = seconds_since(t0);
  return {conv && div && t < 60.0,
          fmt::format("(5000, 25) {} after {} it, rate {:.3f}, {} sign changes, balance {:.1e}; "
                      "(5000, 40) {} after {} it, rate {:.3f}, {} sign changes; {:.2f} s",
                      to_string(ra.verdict), ra.state.iteration, ra.rate, osc_a, balance, to_string(rb.verdict),
                      rb.state.iteration, rb.rate, osc_b, t)};
}

Outcome cmb_round_trip() {
  const CMBParams p{.E = 200e9, .sigma_f = 1.2e9, .eps_f = 0.3, .b = -0.08, .c = -0.6};
  double worst = 0.0;
  for (double N : {10.0, 1e3, 1e5, 1e7}) {
    worst = std::max(worst, std::abs(cmb_det_life(cmb_strain_amplitude(N, p), 0.0, p) - N) / N);
  }
  return {worst <= 1e-10, fmt::format("max relative life error {:.1e}", worst)};
}

Outcome case_study_front() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = case_study_spec();
  const auto mesh = bar_mesh(spec);
  DescentConfig cfg;
  cfg.initial_step = 0.5;
  cfg.max_step = 1.0;
  cfg.max_iter = 100;
  const auto weights = parse_weights("0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9");
  const auto archive = front_sweep(mesh, weights, cfg, case_study_problem(), {}, 1, spec.x0 + 0.5 * spec.length);
  const auto& r = archive.records();
  bool ok = r.size() == 9 && archive.mutually_nondominated() && archive.failures.empty();
  bool monotone_front = true, thicker = true, descent = true;
  for (std::size_t i = 1; i < r.size(); ++i) {
    monotone_front = monotone_front && r[i].J1 < r[i - 1].J1 && r[i].J2 > r[i - 1].J2;
    thicker = thicker && r[i].mid_thickness >= r[i - 1].mid_thickness;
  }
  for (const auto& rec : r) {
    for (std::size_t k = 1; k < rec.log.size(); ++k) descent = descent && rec.log[k].Jw < rec.log[k - 1].Jw;
  }
  const double t = seconds_since(t0);
  ok = ok && monotone_front && thicker && descent && t < 1800.0;
  std::string thick;
  for (const auto& rec : r) thick += (thick.empty() ? "" : " ") + fmt::format("{:.3f}", rec.mid_thickness);
  return {ok, fmt::format("{} nondominated designs, J1/J2 monotone {}, J^w decreasing {}, "
                          "mid thickness [{}] m, {:.1f} s",
                          r.size(), monotone_front, descent, thick, t)};
}

Outcome common_descent() {
  const auto mesh = bar_mesh(case_study_spec());
  const auto ev = evaluate(mesh, case_study_problem());
  const Eigen::VectorXd s = represent_gradient(mesh, ev.dJ1);
  const InnerProduct metric = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return metric_inner(mesh, {}, x, y);
  };
  const double critical = common_descent_direction({s, -s}, metric).norm() / s.norm();

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  double worst = -INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd a(12), b(12);
    for (int i = 0; i < 12; ++i) {
      a[i] = n01(rng);
      b[i] = n01(rng);
    }
    const auto d = common_descent_direction({a, b});
    for (const auto& g : {a, b}) worst = std::max(worst, (d.dot(g) + d.squaredNorm()) / g.squaredNorm());
  }
  return {critical <= 1e-12 && worst <= 1e-12,
          fmt::format("|d|/|g| = {:.1e} at opposite gradients; max (<d,g> + |d|^2)/|g|^2 = {:.1e} on 100 pairs",
                      critical, worst)};
}

Outcome smoothing() {
  const auto spec = case_study_spec();
  const auto mesh = bar_mesh(spec);
  const int N = mesh.grid.node_count();
  // lower face nodes, ordered along the bar
  std::vector<int> lower;
  for (int n : movable_boundary_nodes(mesh)) {
    const auto& p = mesh.grid.node(n);
    if (p.y() < spec.y_lower + hump_profile(spec, p.x()) + 0.5 * spec.thickness) lower.push_back(n);
  }
  std::sort(lower.begin(), lower.end(), [&](int a, int b) { return mesh.grid.node(a).x() < mesh.grid.node(b).x(); });
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(2 * N);
  int sign = 1;
  for (int n : lower) {
    raw[2 * n + 1] = sign;
    sign = -sign;
  }
  const Eigen::VectorXd sm = dtn_smooth(mesh, raw);
  auto tv = [&](const Eigen::VectorXd& v) {
    double t = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) {
      mx = std::max(mx, std::abs(v[2 * lower[i] + 1]));
      if (i) t += std::abs(v[2 * lower[i] + 1] - v[2 * lower[i - 1] + 1]);
    }
    return t / mx;
  };
  const double tv_raw = tv(raw), tv_smooth = tv(sm);

  // clamping and linearity of the volume representation
  const auto ev = evaluate(mesh, case_study_problem());
  const Eigen::VectorXd x = ev.dJ1 / ev.dJ1.norm(), y = ev.dJ2 / ev.dJ2.norm();
  const Eigen::VectorXd sx = represent_gradient(mesh, x), sy = represent_gradient(mesh, y);
  const Eigen::VectorXd sxy = represent_gradient(mesh, 2.5 * x - 0.75 * y);
  const double lin = (sxy - (2.5 * sx - 0.75 * sy)).norm() / sxy.norm();
  const auto clamped = metric_clamped_nodes(mesh);
  double on_clamp = 0.0;
  int n_clamped = 0;
  for (int n = 0; n < N; ++n) {
    if (!clamped[n]) continue;
    ++n_clamped;
    on_clamp = std::max({on_clamp, nodal(sx, n).norm(), nodal(sxy, n).norm()});
  }

  VtkFields f;
  f.point_vectors["raw_boundary_input"] = raw;
  f.point_vectors["smoothed_boundary"] = sm;
  f.point_vectors["raw_gradient_J1"] = x;
  f.point_vectors["represented_gradient_J1"] = sx;
  write_vtk("acceptance_smoothing.vtk", mesh, "raw and smoothed shape gradients on the case-study bar", f);
  return {on_clamp <= 1e-14 * sx.lpNorm<Eigen::Infinity>() && n_clamped > 0 && lin <= 1e-12 && tv_smooth < tv_raw,
          fmt::format("max |s| on {} clamped nodes {:.1e}, linearity {:.1e}, scaled TV {:.2f} -> {:.2f} on {} "
                      "boundary nodes; acceptance_smoothing.vtk written",
                      n_clamped, on_clamp, lin, tv_raw, tv_smooth, lower.size())};
}

double forrester(double x) { return std::pow(6.0 * x - 2.0, 2) * std::sin(12.0 * x - 4.0); }

Outcome gek() {
  auto sin_set = [](int n, bool grads) {
    TrainingSet s;
    for (int i = 0; i < n; ++i) {
      const double x = 2.0 * std::numbers::pi * i / (n - 1);
      s.x.push_back(Eigen::VectorXd::Constant(1, x));
      s.y.push_back(std::sin(x));
      if (grads) s.grad.push_back(Eigen::VectorXd::Constant(1, std::cos(x)));
    }
    return s;
  };
  const auto data = sin_set(8, true);
  const auto model = KrigingModel::fit(data, true);
  double e_val = 0.0, e_grad = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    e_val = std::max(e_val, std::abs(model.predict(data.x[i]).mean - data.y[i]));
    e_grad = std::max(e_grad, std::abs(model.predict_gradient(data.x[i])[0] - data.grad[i][0]));
  }
  const double tol = 10.0 * model.nugget();
  const auto plain = KrigingModel::fit(sin_set(8, false), false);
  double r_plain = 0.0, r_gek = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0 * std::numbers::pi * i / 99.0);
    r_plain += std::pow(plain.predict(x).mean - std::sin(x[0]), 2);
    r_gek += std::pow(model.predict(x).mean - std::sin(x[0]), 2);
  }
  r_plain = std::sqrt(r_plain / 100);
  r_gek = std::sqrt(r_gek / 100);

  std::vector<Eigen::VectorXd> cand;
  double xmin = 0.0, fmin = INFINITY;
  for (int i = 0; i <= 2000; ++i) {
    const double x = i / 2000.0;
    cand.push_back(Eigen::VectorXd::Constant(1, x));
    if (forrester(x) < fmin) {
      fmin = forrester(x);
      xmin = x;
    }
  }
  std::vector<Eigen::VectorXd> init;
  for (double x : {0.0, 0.25, 0.5, 0.75, 1.0}) init.push_back(Eigen::VectorXd::Constant(1, x));
  const auto loop = ei_loop([](const Eigen::VectorXd& x) { return forrester(x[0]); }, init, cand, 10);
  const double found = loop.data.x[loop.best_index][0];
  return {e_val <= tol && e_grad <= tol && r_gek <= r_plain && std::abs(found - xmin) <= 1e-2,
          fmt::format("interpolation error value {:.1e}, gradient {:.1e} (10 nugget = {:.0e}); RMSE GEK {:.2e} <= "
                      "Kriging {:.2e}; EI minimum x = {} vs {}",
                      e_val, e_grad, tol, r_gek, r_plain, format_number(found), format_number(xmin))};
}

double system_difference(const ElasticSystem& a, const ElasticSystem& b) {
  double diff = (a.F - b.F).lpNorm<Eigen::Infinity>() / std::max(1e-300, b.F.lpNorm<Eigen::Infinity>());
  double scale = 0.0;
  for (const auto& r : b.rows) {
    for (const auto& m : r.blocks) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  }
  for (std::size_t n = 0; n < b.rows.size(); ++n) {
    if (a.rows[n].cols != b.rows[n].cols) return INFINITY;
    for (std::size_t k = 0; k < b.rows[n].blocks.size(); ++k) {
      diff = std::max(diff, (a.rows[n].blocks[k] - b.rows[n].blocks[k]).cwiseAbs().maxCoeff() / scale);
    }
  }
  if (a.free_dofs != b.free_dofs) return INFINITY;
  return diff;
}

Outcome composite_fe() {
  using T = BoundaryTag;
  const auto g = build_grid(30, 18, {0, 0}, {1, 0.6});
  const int n = 96;
  std::vector<Vec2> base;
  std::vector<BoundaryTag> tags;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    base.push_back(Vec2(0.5, 0.3) + 0.2 * Vec2(std::cos(a), std::sin(a)));
    tags.push_back(k < n / 4 ? T::NeumannFixed : (k >= n / 2 && k < 3 * n / 4 ? T::Dirichlet : T::NeumannFree));
  }
  const auto mat = ElasticMaterial::from_young(345e9, 0.26);
  LoadCase load;
  load.traction = {1000.0, 0.0};
  load.body_force = {0.0, -20.0};
  BoundaryCurve prev(base, tags);
  auto mesh = adapt_to_boundary(g, prev);
  auto sys = assemble(mesh, mat, load);
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int equal = 0, both_rejected = 0, incremental = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pts = prev.points();
    const double amp = 0.2 * g.hx() * u(rng);
    const double ph = 3.0 * u(rng);
    const int mode = 2 + trial % 4;
    for (int k = 0; k < n; ++k) {
      pts[k] += amp * std::sin(mode * 2.0 * std::numbers::pi * k / n + ph) * (base[k] - Vec2(0.5, 0.3)).normalized();
    }
    const BoundaryCurve next(pts, tags);
    AdaptedMesh fresh;
    bool fresh_ok = true, inc_ok = true;
    try {
      fresh = adapt_to_boundary(g, next);
    } catch (const DegenerateMeshError&) {
      fresh_ok = false;
    }
    UpdateResult r;
    try {
      r = update_boundary(mesh, next, prev);
    } catch (const DegenerateMeshError&) {
      inc_ok = false;
    }
    if (!fresh_ok || !inc_ok) {
      both_rejected += !fresh_ok && !inc_ok;
      continue;
    }
    incremental += !r.changes.full_readaptation;
    reassemble(sys, r.mesh, mat, load, r.changes);
    const auto full = assemble(fresh, mat, load);
    double d = system_difference(sys, full);
    for (int k = 0; k < g.node_count(); ++k) {
      d = std::max(d, (r.mesh.grid.node(k) - fresh.grid.node(k)).norm());
    }
    if (r.mesh.status != fresh.status) d = INFINITY;
    worst = std::max(worst, d);
    equal += d <= 1e-12;
    mesh = r.mesh;
    prev = next;
  }
  return {equal + both_rejected == 50 && incremental == equal,
          fmt::format("{} of 50 perturbations equal (max relative difference {:.1e}, {} incremental), {} rejected by "
                      "both paths",
                      equal, worst, incremental, both_rejected)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "turboshape_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> configs{
      "[run]\nsubcommand = thermal\nrun_id = thermal\n[thermal]\nh = 5000\nk = 25\n",
      "[run]\nsubcommand = stability-map\nrun_id = map\nthreads = 3\n[thermal]\nh_list = 5000\nk_list = 10, 25, 40\n",
      "[run]\nsubcommand = surrogate\nrun_id = surrogate\nseed = 5\nthreads = 2\n",
      "[run]\nsubcommand = check-gradients\nrun_id = check\nseed = 3\n[geometry]\npreset = coarse\n",
      "[run]\nsubcommand = pareto\nrun_id = pareto\nthreads = 3\n[geometry]\npreset = coarse\n"
      "[optimizer]\nweights = 0.2, 0.5, 0.8\nmax_iter = 15\n",
  };
  int files = 0, mismatches = 0;
  for (const auto& text : configs) {
    std::vector<std::vector<std::pair<std::string, std::string>>> runs;
    for (int rep = 0; rep < 2; ++rep) {
      auto cfg = parse_config_text(text);
      cfg.output_dir = root.string();  // same directory: the second run overwrites the first
      const auto r = run(cfg);
      if (r.exit_code != kExitOk) return {false, "run failed: " + r.error_line};
      std::vector<std::pair<std::string, std::string>> out;
      for (const auto& name : r.outputs) {
        if (name.ends_with(".csv")) out.emplace_back(name, read_text((fs::path(r.run_dir) / name).string()));
      }
      auto manifest = nlohmann::json::parse(read_text((fs::path(r.run_dir) / "manifest.json").string()));
      manifest.erase("timing");
      out.emplace_back("manifest.json without timing", manifest.dump());
      runs.push_back(out);
    }
    files += static_cast<int>(runs[0].size());
    if (runs[0] != runs[1]) ++mismatches;
  }
  fs::remove_all(root);
  return {mismatches == 0 && files > 10,
          fmt::format("{} artifacts from {} configurations compared across two runs, {} mismatching configurations",
                      files, configs.size(), mismatches)};
}

}  // namespace

int main() {
  criterion(1, "adjoint correctness", adjoint_correctness);
  criterion(2, "Weibull oracle", weibull_oracle);
  criterion(3, "load homogeneity", load_homogeneity);
  criterion(4, "thermal loop behavior", thermal_loop);
  criterion(5, "CMB round trip", cmb_round_trip);
  criterion(6, "case-study front", case_study_front);
  criterion(7, "common-descent criticality", common_descent);
  criterion(8, "smoothing", smoothing);
  criterion(9, "GEK", gek);
  criterion(10, "composite-FE equivalence", composite_fe);
  criterion(11, "determinism", determinism);
  fmt::print("{} of 11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
