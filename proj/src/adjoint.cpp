#include "turboshape/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace turboshape {

namespace {

struct ElementState {
  P1Element el;
  Eigen::Matrix2d grad_u;
  Eigen::Matrix2d sigma;
};

ElementState element_state(const AdaptedMesh& mesh, double lam, double mu, const Eigen::VectorXd& u, int t) {
  const auto& tri = mesh.grid.triangle(t);
  ElementState s;
  s.el = p1_element(mesh.grid.node(tri[0]), mesh.grid.node(tri[1]), mesh.grid.node(tri[2]));
  s.grad_u.setZero();
  for (int i = 0; i < 3; ++i) s.grad_u += nodal(u, tri[i]) * s.el.grad.row(i);
  const Eigen::Matrix2d eps = 0.5 * (s.grad_u + s.grad_u.transpose());
  s.sigma = lam * eps.trace() * Eigen::Matrix2d::Identity() + 2.0 * mu * eps;
  return s;
}

Eigen::Matrix2d apply_c(const Eigen::Matrix2d& g, double lam, double mu) {
  const Eigen::Matrix2d sym = 0.5 * (g + g.transpose());
  return lam * sym.trace() * Eigen::Matrix2d::Identity() + 2.0 * mu * sym;
}

}  // namespace

StructuralProblem case_study_problem() {
  StructuralProblem p;
  p.material = ElasticMaterial::from_young(345e9, 0.26, Kinematics::PlaneStress);
  p.load.traction = {1000.0, 0.0};
  p.weibull = {5.0, 200.0};
  return p;
}

double objective_j1(const AdaptedMesh& mesh, const StructuralProblem& prob, const Eigen::VectorXd& u) {
  return weibull_functional(mesh, compute_stress(mesh, prob.material, u), prob.weibull, prob.n_angles);
}

ObjectivePartials objective_partials(const AdaptedMesh& mesh, const StructuralProblem& prob,
                                     const Eigen::VectorXd& u) {
  const int N = mesh.grid.node_count();
  ObjectivePartials out{Eigen::VectorXd::Zero(2 * N), Eigen::VectorXd::Zero(2 * N)};
  const double lam = prob.material.lambda_2d();
  const double mu = prob.material.mu;
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const ElementState s = element_state(mesh, lam, mu, u, t);
    const double rho = weibull_density(s.sigma, prob.weibull, prob.n_angles);
    const Eigen::Matrix2d G = weibull_density_gradient(s.sigma, prob.weibull, prob.n_angles);
    if (rho == 0.0 && G.isZero(0.0)) continue;
    const Eigen::Matrix2d S = apply_c(G, lam, mu);
    const double A = s.el.area;
    for (int i = 0; i < 3; ++i) {
      const Vec2 gi = s.el.grad.row(i).transpose();
      out.dJdU.segment<2>(2 * tri[i]) += A * (S * gi);
      const Vec2 Sg = S * gi;
      for (int k = 0; k < 2; ++k) {
        out.dJdX[2 * tri[i] + k] += A * gi[k] * rho - A * s.grad_u.col(k).dot(Sg);
      }
    }
  }
  return out;
}

Eigen::VectorXd solve_adjoint(const DisplacementSolver& solver, const Eigen::VectorXd& dJdU) {
  return solver.solve(dJdU);
}

Eigen::VectorXd total_derivative(const AdaptedMesh& mesh, const StructuralProblem& prob, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& lambda, const Eigen::VectorXd& dJdX_partial,
                                 bool zero_fixed) {
  Eigen::VectorXd g = dJdX_partial;
  const double lam = prob.material.lambda_2d();
  const double mu = prob.material.mu;
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const ElementState su = element_state(mesh, lam, mu, u, t);
    const ElementState sl = element_state(mesh, lam, mu, lambda, t);
    const double A = su.el.area;
    const double work = (su.sigma.array() * sl.grad_u.array()).sum();
    const Vec2 f = prob.load.force_on(t);
    double lf = 0.0;
    for (int i = 0; i < 3; ++i) lf += nodal(lambda, tri[i]).dot(f);
    for (int b = 0; b < 3; ++b) {
      const Vec2 gb = su.el.grad.row(b).transpose();
      const Vec2 sl_g = sl.sigma * gb;
      const Vec2 su_g = su.sigma * gb;
      for (int k = 0; k < 2; ++k) {
        // Lambda^T dB/dX U
        const double dB = A * (gb[k] * work - su.grad_u.col(k).dot(sl_g) - sl.grad_u.col(k).dot(su_g));
        // Lambda^T dF/dX (body force)
        const double dF = A * gb[k] * lf / 3.0;
        g[2 * tri[b] + k] += dF - dB;
      }
    }
  }
  const Vec2 trac = prob.load.traction;
  if (trac.squaredNorm() > 0.0) {
    for (const auto& e : mesh.boundary_edges) {
      if (e.tag != BoundaryTag::NeumannFixed) continue;
      const Vec2 d = mesh.grid.node(e.n1) - mesh.grid.node(e.n0);
      const double L = d.norm();
      const double lg = 0.5 * (nodal(lambda, e.n0) + nodal(lambda, e.n1)).dot(trac);
      const Vec2 dL = d / L;
      g.segment<2>(2 * e.n1) += lg * dL;
      g.segment<2>(2 * e.n0) -= lg * dL;
    }
  }
  if (zero_fixed) zero_fixed_nodes(mesh, g);
  return g;
}

double volume(const AdaptedMesh& mesh) { return mesh.inside_area(); }

Eigen::VectorXd volume_gradient(const AdaptedMesh& mesh, bool zero_fixed) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * mesh.grid.node_count());
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const P1Element el = p1_element(mesh.grid.node(tri[0]), mesh.grid.node(tri[1]), mesh.grid.node(tri[2]));
    for (int b = 0; b < 3; ++b) g.segment<2>(2 * tri[b]) += el.area * el.grad.row(b).transpose();
  }
  if (zero_fixed) zero_fixed_nodes(mesh, g);
  return g;
}

void zero_fixed_nodes(const AdaptedMesh& mesh, Eigen::VectorXd& g) {
  const auto fixed = mesh.fixed_nodes();
  const auto active = mesh.active_nodes();
  for (int n = 0; n < mesh.grid.node_count(); ++n) {
    if (fixed[n] || !active[n]) g.segment<2>(2 * n).setZero();
  }
}

std::vector<int> movable_boundary_nodes(const AdaptedMesh& mesh) {
  const auto fixed = mesh.fixed_nodes();
  std::vector<char> mark(mesh.grid.node_count(), 0);
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag != BoundaryTag::NeumannFree) continue;
    if (!fixed[e.n0]) mark[e.n0] = 1;
    if (!fixed[e.n1]) mark[e.n1] = 1;
  }
  std::vector<int> out;
  for (int n = 0; n < mesh.grid.node_count(); ++n) {
    if (mark[n]) out.push_back(n);
  }
  return out;
}

Evaluation evaluate(const AdaptedMesh& mesh, const StructuralProblem& prob, bool with_gradients) {
  Evaluation ev;
  const ElasticSystem sys = assemble(mesh, prob.material, prob.load);
  DisplacementSolver solver(sys, prob.solver);
  ev.u = solver.solve(sys.F);
  ev.J1 = objective_j1(mesh, prob, ev.u);
  ev.J2 = volume(mesh);
  if (with_gradients) {
    const auto part = objective_partials(mesh, prob, ev.u);
    const Eigen::VectorXd lambda = solve_adjoint(solver, part.dJdU);
    ev.dJ1 = total_derivative(mesh, prob, ev.u, lambda, part.dJdX);
    ev.dJ2 = volume_gradient(mesh);
  }
  return ev;
}

AdaptedMesh displaced(const AdaptedMesh& mesh, const Eigen::VectorXd& V, double t) {
  AdaptedMesh out = mesh;
  auto& x = out.grid.nodes();
  for (int n = 0; n < out.grid.node_count(); ++n) x[n] += t * V.segment<2>(2 * n);
  return out;
}

FdReport check_gradient_fd(const AdaptedMesh& mesh, const StructuralProblem& prob, int n_directions,
                           std::uint64_t seed, double base_step) {
  const Evaluation ev = evaluate(mesh, prob, true);
  const auto nodes = movable_boundary_nodes(mesh);
  if (nodes.empty()) throw InvalidArgument("mesh has no movable boundary nodes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FdReport report;
  for (int d = 0; d < n_directions; ++d) {
    Eigen::VectorXd V = Eigen::VectorXd::Zero(2 * mesh.grid.node_count());
    for (int n : nodes) {
      Vec2 v(normal(rng), normal(rng));
      V.segment<2>(2 * n) = v.normalized();
    }
    FdCheck c;
    c.directional_adjoint = ev.dJ1.dot(V);
    c.plateau_error = std::numeric_limits<double>::infinity();
    const double scale = std::max(std::abs(c.directional_adjoint), 1e-300);
    for (int k = 0; k < 5; ++k) {
      const double h = base_step * std::pow(10.0, -k);
      const double jp = evaluate(displaced(mesh, V, h), prob, false).J1;
      const double jm = evaluate(displaced(mesh, V, -h), prob, false).J1;
      const double fd = (jp - jm) / (2.0 * h);
      const double err = std::abs(fd - c.directional_adjoint) / scale;
      c.steps.push_back(h);
      c.errors.push_back(err);
      if (err < c.plateau_error) {
        c.plateau_error = err;
        c.best_step = h;
        c.directional_fd = fd;
      }
    }
    report.max_error = std::max(report.max_error, c.plateau_error);
    report.checks.push_back(std::move(c));
  }
  return report;
}

}  // namespace turboshape
