#include "turboshape/thermal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/SparseCholesky>

#include "turboshape/elasticity.hpp"

namespace turboshape {

void ChannelGeometry::validate() const {
  if (!(length > 0.0)) throw InvalidArgument("channel length must be positive");
  if (n_cells < 1) throw InvalidArgument("channel needs at least one cell");
  if (!(w > 0.0)) throw InvalidArgument("mass flow must be positive");
  if (!(R_s > 0.0 && c_p > 0.0)) throw InvalidArgument("gas constants must be positive");
  if (!(T_in > 0.0 && p_in > 0.0)) throw InvalidArgument("inlet state must be physical");
  if (!(friction >= 0.0)) throw InvalidArgument("friction factor must be non-negative");
  for (int i = 0; i <= n_cells; ++i) {
    const double x = i * dx();
    if (!(area(x) > 0.0 && hydraulic_diameter(x) > 0.0)) {
      throw InvalidArgument("area and hydraulic diameter must be positive");
    }
  }
}

namespace {

struct Face {
  double v, T, p, rho;
};

Face inlet_face(const ChannelGeometry& g) {
  Face f;
  f.T = g.T_in;
  f.p = g.p_in;
  f.rho = g.p_in / (g.R_s * g.T_in);
  f.v = g.w / (f.rho * g.area(0.0));
  return f;
}

// Momentum balance over cell j as printed: w dv = A dp + A f rho v^2 / (2 D_h) dx + A rho omega^2 r dr,
// sources averaged over both faces. `temp_of_v` gives the outlet temperature for a trial velocity.
template <class TempOfV>
Face solve_cell(const ChannelGeometry& g, int j, const Face& in, TempOfV temp_of_v) {
  const double x0 = j * g.dx();
  const double x1 = (j + 1) * g.dx();
  const double A1 = g.area(x1);
  const double Am = 0.5 * (g.area(x0) + A1);
  const double Dm = 0.5 * (g.hydraulic_diameter(x0) + g.hydraulic_diameter(x1));
  const double dx = g.dx();
  const double r0 = g.radius(x0);
  const double r1 = g.radius(x1);
  const double rr = 0.5 * (r1 * r1 - r0 * r0);  // integral of r r' over the cell
  const double w = g.w;
  const double fr0 = g.friction * in.rho * in.v * in.v / (2.0 * Dm);
  const double cf = Am * g.omega * g.omega * rr;

  auto residual = [&](double v, double& dF) {
    const double T = temp_of_v(v);
    const double rho = w / (v * A1);
    const double p = rho * g.R_s * T;
    const double fr1 = g.friction * rho * v * v / (2.0 * Dm);  // = f w v / (2 D A1)
    // numerical derivative of the whole residual keeps T(v) generic
    const double F = w * (v - in.v) - Am * (p - in.p) - dx * Am * 0.5 * (fr0 + fr1) - cf * 0.5 * (in.rho + rho);
    const double e = 1e-7 * v;
    const double Tp = temp_of_v(v + e);
    const double rhop = w / ((v + e) * A1);
    const double Fp = w * (v + e - in.v) - Am * (rhop * g.R_s * Tp - in.p) -
                      dx * Am * 0.5 * (fr0 + g.friction * rhop * (v + e) * (v + e) / (2.0 * Dm)) -
                      cf * 0.5 * (in.rho + rhop);
    dF = (Fp - F) / e;
    return F;
  };

  // bracket the root on v > 0
  double lo = in.v;
  double hi = in.v;
  double d;
  double Flo = residual(lo, d);
  double Fhi = Flo;
  for (int k = 0; k < 200 && Flo > 0.0; ++k) {
    hi = lo;
    Fhi = Flo;
    lo *= 0.5;
    Flo = residual(lo, d);
  }
  for (int k = 0; k < 200 && Fhi < 0.0; ++k) {
    lo = hi;
    Flo = Fhi;
    hi *= 2.0;
    Fhi = residual(hi, d);
  }
  if (!(Flo <= 0.0 && Fhi >= 0.0) || !std::isfinite(Flo) || !std::isfinite(Fhi)) {
    throw NonPhysicalStateError("no admissible velocity in channel cell " + std::to_string(j), j);
  }
  // safeguarded Newton
  double v = Flo == 0.0 ? lo : (Fhi == 0.0 ? hi : 0.5 * (lo + hi));
  for (int it = 0; it < 100; ++it) {
    const double F = residual(v, d);
    if (F == 0.0) break;
    if (F < 0.0) {
      lo = v;
    } else {
      hi = v;
    }
    double next = v - F / d;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - v) <= 1e-15 * v) {
      v = next;
      break;
    }
    v = next;
  }
  Face out;
  out.v = v;
  out.T = temp_of_v(v);
  out.rho = w / (v * A1);
  out.p = out.rho * g.R_s * out.T;
  if (!(out.v > 0.0 && out.T > 0.0 && out.p > 0.0) || !std::isfinite(out.p)) {
    throw NonPhysicalStateError("non-physical state in channel cell " + std::to_string(j), j);
  }
  return out;
}

ChannelState make_state(int n) {
  ChannelState s;
  s.v.resize(n + 1);
  s.T.resize(n + 1);
  s.p.resize(n + 1);
  s.rho.resize(n + 1);
  s.S.resize(n);
  return s;
}

void store(ChannelState& s, int i, const Face& f) {
  s.v[i] = f.v;
  s.T[i] = f.T;
  s.p[i] = f.p;
  s.rho[i] = f.rho;
}

}  // namespace

ChannelState march_channel(const ChannelGeometry& geom, const std::vector<double>& S) {
  geom.validate();
  const int n = geom.n_cells;
  if (static_cast<int>(S.size()) != n) throw InvalidArgument("source needs one value per channel cell");
  ChannelState s = make_state(n);
  Face f = inlet_face(geom);
  store(s, 0, f);
  for (int j = 0; j < n; ++j) {
    const double q = f.v * f.T + S[j] * geom.dx();
    if (!(q > 0.0) || !std::isfinite(q)) {
      throw NonPhysicalStateError("non-physical temperature in channel cell " + std::to_string(j), j);
    }
    f = solve_cell(geom, j, f, [q](double v) { return q / v; });
    s.S[j] = S[j];
    store(s, j + 1, f);
  }
  return s;
}

ChannelState march_heated(const ChannelGeometry& geom, const std::vector<double>& heat) {
  geom.validate();
  const int n = geom.n_cells;
  if (static_cast<int>(heat.size()) != n) throw InvalidArgument("heat needs one value per channel cell");
  ChannelState s = make_state(n);
  Face f = inlet_face(geom);
  store(s, 0, f);
  for (int j = 0; j < n; ++j) {
    const double T = f.T + heat[j] / (geom.w * geom.c_p);
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw NonPhysicalStateError("non-physical temperature in channel cell " + std::to_string(j), j);
    }
    const Face in = f;
    f = solve_cell(geom, j, in, [T](double) { return T; });
    s.S[j] = (f.v * f.T - in.v * in.T) / geom.dx();
    store(s, j + 1, f);
  }
  return s;
}

void ConductionProblem::validate() const {
  if (!(k > 0.0)) throw InvalidArgument("conductivity must be positive");
  if (!(h_int >= 0.0 && h_ext >= 0.0)) throw InvalidArgument("heat transfer coefficients must be non-negative");
  if (edge_kind.size() != mesh.boundary_edges.size() || edge_cell.size() != mesh.boundary_edges.size()) {
    throw InvalidArgument("wall classification does not match the boundary edges");
  }
  for (std::size_t e = 0; e < edge_kind.size(); ++e) {
    if (edge_kind[e] == WallKind::Internal) {
      if (edge_cell[e] < 0 || edge_cell[e] >= static_cast<int>(U_int.size())) {
        throw InvalidArgument("internal wall edge is not mapped to a channel cell");
      }
    }
  }
}

Eigen::VectorXd solve_conduction(const ConductionProblem& prob) {
  prob.validate();
  const auto& mesh = prob.mesh;
  const int N = mesh.grid.node_count();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const P1Element el = p1_element(mesh.grid.node(tri[0]), mesh.grid.node(tri[1]), mesh.grid.node(tri[2]));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trip.emplace_back(tri[i], tri[j], prob.k * el.area * el.grad.row(i).dot(el.grad.row(j)));
      }
    }
  }
  bool robin = false;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    double h = 0.0;
    double Ub = 0.0;
    if (prob.edge_kind[e] == WallKind::Internal) {
      h = prob.h_int;
      Ub = prob.U_int[prob.edge_cell[e]];
    } else if (prob.edge_kind[e] == WallKind::External) {
      h = prob.h_ext;
      Ub = prob.U_ext;
    }
    if (h == 0.0) continue;
    robin = true;
    const double L = (mesh.grid.node(be.n1) - mesh.grid.node(be.n0)).norm();
    trip.emplace_back(be.n0, be.n0, h * L / 3.0);
    trip.emplace_back(be.n1, be.n1, h * L / 3.0);
    trip.emplace_back(be.n0, be.n1, h * L / 6.0);
    trip.emplace_back(be.n1, be.n0, h * L / 6.0);
    rhs[be.n0] += h * Ub * L / 2.0;
    rhs[be.n1] += h * Ub * L / 2.0;
  }
  if (!robin) throw SingularSystemError("conduction problem needs a Robin boundary with h > 0");

  const auto active = mesh.active_nodes();
  std::vector<int> map(N, -1);
  int n = 0;
  for (int i = 0; i < N; ++i) {
    if (active[i]) map[i] = n++;
  }
  std::vector<Eigen::Triplet<double>> red;
  red.reserve(trip.size());
  for (const auto& tr : trip) {
    if (map[tr.row()] >= 0 && map[tr.col()] >= 0) red.emplace_back(map[tr.row()], map[tr.col()], tr.value());
  }
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(red.begin(), red.end());
  Eigen::VectorXd b(n);
  for (int i = 0; i < N; ++i) {
    if (map[i] >= 0) b[map[i]] = rhs[i];
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
    throw SingularSystemError("conduction system is not positive definite");
  }
  const Eigen::VectorXd x = ldlt.solve(b);
  Eigen::VectorXd U = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < N; ++i) {
    if (map[i] >= 0) U[i] = x[map[i]];
  }
  return U;
}

std::vector<double> wall_heat(const ConductionProblem& prob, const ChannelGeometry& geom, const Eigen::VectorXd& U,
                              int n_cells) {
  std::vector<double> q(n_cells, 0.0);
  const auto& mesh = prob.mesh;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    if (prob.edge_kind[e] != WallKind::Internal) continue;
    const auto& be = mesh.boundary_edges[e];
    const int c = prob.edge_cell[e];
    if (c < 0 || c >= n_cells) throw InvalidArgument("wall edge mapped outside the channel");
    const Vec2 a = mesh.grid.node(be.n0);
    const Vec2 b = mesh.grid.node(be.n1);
    const double L = (b - a).norm();
    const double P = geom.perimeter(0.5 * (a.x() + b.x()));
    q[c] += P * prob.h_int * L * (0.5 * (U[be.n0] + U[be.n1]) - prob.U_int[c]);
  }
  return q;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converged:
      return "converged";
    case Verdict::Diverged:
      return "diverged";
    case Verdict::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

void CouplingOptions::validate() const {
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (!(tol > 0.0)) throw InvalidArgument("coupling tolerance must be positive");
  if (!(relaxation > 0.0 && relaxation <= 1.0)) throw InvalidArgument("relaxation must lie in (0, 1]");
  if (rate_window < 2) throw InvalidArgument("rate window must be at least 2");
  if (growth_limit < 1) throw InvalidArgument("growth limit must be at least 1");
  if (!(blowup_factor > 1.0)) throw InvalidArgument("blow-up factor must exceed 1");
}

double estimate_rate(const std::vector<double>& error, int window) {
  std::vector<double> ys;
  const int n = static_cast<int>(error.size());
  for (int i = std::max(0, n - window); i < n; ++i) {
    if (error[i] > 0.0 && std::isfinite(error[i])) ys.push_back(std::log(error[i]));
  }
  const int m = static_cast<int>(ys.size());
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += i;
    sy += ys[i];
    sxx += double(i) * i;
    sxy += i * ys[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return std::exp(slope);
}

std::vector<double> lumped_wall_temperature(const ChannelGeometry& geom, const ConductionProblem& prob) {
  const int n = geom.n_cells;
  ConductionProblem p = prob;
  p.U_int.assign(n, 0.0);
  const auto a = wall_heat(p, geom, solve_conduction(p), n);
  p.U_int.assign(n, 1.0);
  const auto a1 = wall_heat(p, geom, solve_conduction(p), n);
  const double wc = geom.w * geom.c_p;
  std::vector<double> T(n);
  double Tin = geom.T_in;
  for (int j = 0; j < n; ++j) {
    const double b = a[j] - a1[j];  // heat lost per kelvin of uniform wall temperature
    T[j] = (Tin + a[j] / wc) / (1.0 + b / wc);
    Tin = T[j];
  }
  return T;
}

CouplingResult couple_iterate(const ChannelGeometry& geom, const ConductionProblem& prob,
                              const CouplingOptions& opt) {
  geom.validate();
  opt.validate();
  const int n = geom.n_cells;
  CouplingResult res;
  res.problem = prob;
  res.problem.U_int.assign(n, geom.T_in);
  res.problem.validate();
  for (std::size_t e = 0; e < prob.edge_kind.size(); ++e) {
    if (prob.edge_kind[e] == WallKind::Internal && prob.edge_cell[e] >= n) {
      throw InvalidArgument("wall edge mapped outside the channel");
    }
  }
  std::vector<int> mapped(n, 0);
  for (std::size_t e = 0; e < prob.edge_kind.size(); ++e) {
    if (prob.edge_kind[e] == WallKind::Internal) ++mapped[prob.edge_cell[e]];
  }
  if (prob.h_int > 0.0 && std::any_of(mapped.begin(), mapped.end(), [](int c) { return c == 0; })) {
    throw InvalidArgument("every channel cell needs at least one wall edge");
  }

  if (opt.initial_guess == InitialGuess::Lumped && prob.h_int > 0.0) {
    res.problem.U_int = lumped_wall_temperature(geom, res.problem);
  }
  res.channel = march_heated(geom, std::vector<double>(n, 0.0));
  int growth = 0;
  res.verdict = Verdict::MaxIter;
  for (int it = 1; it <= opt.max_iter; ++it) {
    res.state.iteration = it;
    res.U = solve_conduction(res.problem);
    const auto heat = wall_heat(res.problem, geom, res.U, n);
    try {
      res.channel = march_heated(geom, heat);
    } catch (const NonPhysicalStateError& e) {
      res.verdict = Verdict::Diverged;
      res.reason = e.what();
      break;
    }
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
      const double target = res.channel.cell_T(j);
      const double next = res.problem.U_int[j] + opt.relaxation * (target - res.problem.U_int[j]);
      err = std::max(err, std::abs(next - res.problem.U_int[j]));
      res.problem.U_int[j] = next;
    }
    res.state.outlet_T.push_back(res.channel.outlet_T());
    res.state.error.push_back(err);
    const auto& e = res.state.error;
    if (err <= opt.tol) {
      res.verdict = Verdict::Converged;
      break;
    }
    if (e.size() >= 2) growth = err > e[e.size() - 2] ? growth + 1 : 0;
    if (err > opt.blowup_factor * e.front()) {
      res.verdict = Verdict::Diverged;
      res.reason = "error estimate exceeded its initial value by the blow-up factor";
      break;
    }
    if (growth >= opt.growth_limit) {
      res.verdict = Verdict::Diverged;
      res.reason = "error estimate grew for " + std::to_string(growth) + " consecutive iterations";
      break;
    }
  }
  res.rate = estimate_rate(res.state.error, opt.rate_window);
  return res;
}

double energy_balance(const ChannelState& channel, const Eigen::VectorXd& U, const ConductionProblem& prob,
                      const ChannelGeometry& geom) {
  const int n = channel.n_cells();
  ConductionProblem p = prob;
  p.U_int.resize(n);
  for (int j = 0; j < n; ++j) p.U_int[j] = channel.cell_T(j);
  double solid = 0.0;
  for (double q : wall_heat(p, geom, U, n)) solid += q;
  const double fluid = geom.w * geom.c_p * (channel.outlet_T() - channel.T.front());
  if (solid == 0.0) return fluid == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(solid - fluid) / std::abs(solid);
}

StabilityMap stability_map(const ChannelGeometry& geom, const ConductionProblem& prob_template,
                           const std::vector<double>& h_list, const std::vector<double>& k_list,
                           const CouplingOptions& opt, int threads) {
  if (threads < 1) throw InvalidArgument("thread count must be positive");
  StabilityMap map;
  map.h = h_list;
  map.k = k_list;
  const std::size_t nh = h_list.size();
  const std::size_t nk = k_list.size();
  map.verdicts.assign(nh, std::vector<Verdict>(nk, Verdict::MaxIter));
  map.rates.assign(nh, std::vector<double>(nk, 0.0));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < nh * nk; idx = next++) {
      const std::size_t i = idx / nk;
      const std::size_t j = idx % nk;
      ConductionProblem p = prob_template;
      p.h_int = h_list[i];
      p.h_ext = h_list[i];
      p.k = k_list[j];
      auto r = couple_iterate(geom, p, opt);
      map.verdicts[i][j] = r.verdict;
      map.rates[i][j] = r.rate;
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(nh * nk, 1)));
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  map.critical_k.assign(nh, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < nh; ++i) {
    std::size_t first = nk;
    for (std::size_t j = nk; j-- > 0;) {
      if (map.verdicts[i][j] != Verdict::Diverged) break;
      first = j;
    }
    if (first < nk) map.critical_k[i] = k_list[first];
    for (std::size_t j = 0; j < first; ++j) {
      if (map.verdicts[i][j] == Verdict::Diverged) map.monotone = false;
    }
  }
  return map;
}

ChannelGeometry reference_channel(const SlabConfig& cfg) {
  ChannelGeometry g;
  g.length = cfg.length;
  g.n_cells = cfg.n_cells;
  g.w = 6.2e-4;
  return g;
}

ConductionProblem slab_problem(const SlabConfig& cfg) {
  if (cfg.nx < 1 || cfg.ny < 1) throw InvalidArgument("slab mesh needs at least one cell per direction");
  const double hx = cfg.length / cfg.nx;
  const double hy = cfg.height / cfg.ny;
  // two margin cells around the slab so that its edges lie on grid lines
  StructuredGrid grid(cfg.nx + 4, cfg.ny + 4, Vec2(-2 * hx, -2 * hy),
                      Vec2((cfg.nx + 4) * hx, (cfg.ny + 4) * hy));
  constexpr auto F = BoundaryTag::NeumannFree;
  BoundaryCurve curve({{0.0, 0.0}, {cfg.length, 0.0}, {cfg.length, cfg.height}, {0.0, cfg.height}}, {F, F, F, F});
  ConductionProblem p;
  p.mesh = adapt_to_boundary(grid, curve);
  p.k = cfg.k;
  p.h_int = cfg.h;
  p.h_ext = cfg.h;
  p.U_ext = cfg.U_ext;
  p.U_int.assign(cfg.n_cells, 0.0);
  const double tol = 1e-9 * cfg.length;
  for (const auto& be : p.mesh.boundary_edges) {
    const Vec2 a = p.mesh.grid.node(be.n0);
    const Vec2 b = p.mesh.grid.node(be.n1);
    const Vec2 m = 0.5 * (a + b);
    if (std::abs(a.y()) < tol && std::abs(b.y()) < tol) {
      p.edge_kind.push_back(WallKind::Internal);
      const int c = std::clamp(static_cast<int>(std::floor(m.x() / cfg.length * cfg.n_cells)), 0, cfg.n_cells - 1);
      p.edge_cell.push_back(c);
    } else if (std::abs(a.y() - cfg.height) < tol && std::abs(b.y() - cfg.height) < tol) {
      p.edge_kind.push_back(WallKind::External);
      p.edge_cell.push_back(-1);
    } else {
      p.edge_kind.push_back(WallKind::Insulated);
      p.edge_cell.push_back(-1);
    }
  }
  return p;
}

}  // namespace turboshape
