#include "turboshape/representation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "turboshape/elasticity.hpp"

namespace turboshape {

namespace {

double mu_on(const MetricParams& m, int t) { return m.mu_field.empty() ? m.mu : m.mu_field[t]; }

struct MetricSystem {
  Eigen::SparseMatrix<double> full;
  std::vector<int> dof_to_free;
  int n_free = 0;
};

MetricSystem assemble_metric(const AdaptedMesh& mesh, const MetricParams& metric) {
  metric.validate();
  const int N = mesh.grid.node_count();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const P1Element el = p1_element(mesh.grid.node(tri[0]), mesh.grid.node(tri[1]), mesh.grid.node(tri[2]));
    const ElementMatrix K = element_stiffness(el, metric.lambda, mu_on(metric, t));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) trip.emplace_back(2 * tri[i] + a, 2 * tri[j] + b, K(2 * i + a, 2 * j + b));
        }
      }
    }
  }
  MetricSystem s;
  s.full.resize(2 * N, 2 * N);
  s.full.setFromTriplets(trip.begin(), trip.end());
  const auto clamped = metric_clamped_nodes(mesh);
  const auto active = mesh.active_nodes();
  s.dof_to_free.assign(2 * N, -1);
  bool any = false;
  for (int n = 0; n < N; ++n) {
    if (!active[n]) continue;
    if (clamped[n]) {
      any = true;
      continue;
    }
    s.dof_to_free[2 * n] = s.n_free++;
    s.dof_to_free[2 * n + 1] = s.n_free++;
  }
  if (!any) throw SingularSystemError("metric problem has no clamped boundary");
  return s;
}

Eigen::VectorXd solve_metric(const MetricSystem& s, const Eigen::VectorXd& rhs) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < s.full.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(s.full, k); it; ++it) {
      const int r = s.dof_to_free[it.row()];
      const int c = s.dof_to_free[it.col()];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  }
  Eigen::SparseMatrix<double> A(s.n_free, s.n_free);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd b(s.n_free);
  for (int d = 0; d < static_cast<int>(s.dof_to_free.size()); ++d) {
    if (s.dof_to_free[d] >= 0) b[s.dof_to_free[d]] = rhs[d];
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rhs.size());
  if (b.isZero(0.0)) return out;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
    throw SingularSystemError("metric system is not positive definite");
  }
  const Eigen::VectorXd x = ldlt.solve(b);
  for (int d = 0; d < static_cast<int>(s.dof_to_free.size()); ++d) {
    if (s.dof_to_free[d] >= 0) out[d] = x[s.dof_to_free[d]];
  }
  return out;
}

bool step_is_valid(const AdaptedMesh& mesh, const Eigen::VectorXd& d, double t) {
  const auto& g = mesh.grid;
  const double theta = mesh.options.theta_min_deg;
  const double tol = mesh.tol_snap;
  auto pos = [&](int n) -> Vec2 { return g.node(n) - t * d.segment<2>(2 * n); };
  for (int n = 0; n < g.node_count(); ++n) {
    if (d.segment<2>(2 * n).squaredNorm() == 0.0) continue;
    if (!g.contains(pos(n), tol)) return false;
  }
  for (int tr = 0; tr < g.triangle_count(); ++tr) {
    if (!mesh.inside(tr)) continue;
    const auto& tri = g.triangle(tr);
    const Vec2 a = pos(tri[0]);
    const Vec2 b = pos(tri[1]);
    const Vec2 c = pos(tri[2]);
    const Vec2 u = b - a;
    const Vec2 v = c - a;
    if (!(u.x() * v.y() - u.y() * v.x() > 0.0)) return false;
    if (min_angle_deg(a, b, c) < theta) return false;
  }
  return true;
}

}  // namespace

void MetricParams::validate() const {
  if (mu_field.empty()) {
    if (!(mu > 0.0)) throw InvalidArgument("metric mu must be positive");
  } else {
    for (double m : mu_field) {
      if (!(m > 0.0)) throw InvalidArgument("metric mu field must be positive");
    }
  }
  if (!(lambda + mu > 0.0) && mu_field.empty()) throw InvalidArgument("metric needs lambda + mu > 0");
}

MetricParams select_lame_parameters(const AdaptedMesh&, const MetricParams& metric) { return metric; }

std::vector<bool> metric_clamped_nodes(const AdaptedMesh& mesh) { return mesh.fixed_nodes(); }

Eigen::VectorXd represent_gradient(const AdaptedMesh& mesh, const Eigen::VectorXd& raw, const MetricParams& metric) {
  if (raw.size() != 2 * mesh.grid.node_count()) throw InvalidArgument("raw gradient has the wrong size");
  return solve_metric(assemble_metric(mesh, metric), raw);
}

double metric_inner(const AdaptedMesh& mesh, const MetricParams& metric, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y) {
  const MetricSystem s = assemble_metric(mesh, metric);
  return x.dot(s.full * y);
}

Eigen::VectorXd dtn_smooth(const AdaptedMesh& mesh, const Eigen::VectorXd& boundary_values,
                           const MetricParams& metric) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(boundary_values.size());
  std::vector<char> movable(mesh.grid.node_count(), 0);
  const auto fixed = mesh.fixed_nodes();
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag != BoundaryTag::NeumannFree) continue;
    for (int n : {e.n0, e.n1}) {
      if (!fixed[n]) movable[n] = 1;
    }
  }
  for (int n = 0; n < mesh.grid.node_count(); ++n) {
    if (movable[n]) rhs.segment<2>(2 * n) = boundary_values.segment<2>(2 * n);
  }
  Eigen::VectorXd s = represent_gradient(mesh, rhs, metric);
  for (int n = 0; n < mesh.grid.node_count(); ++n) {
    if (!movable[n]) s.segment<2>(2 * n).setZero();
  }
  return s;
}

double max_admissible_step(const AdaptedMesh& mesh, const Eigen::VectorXd& direction, double step) {
  if (step_is_valid(mesh, direction, step)) return step;
  double lo = 0.0;
  double hi = step;
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (step_is_valid(mesh, direction, mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

AdaptedMesh deform_mesh(const AdaptedMesh& mesh, const Eigen::VectorXd& direction, double step) {
  if (!(step >= 0.0)) throw InvalidArgument("step must be non-negative");
  if (direction.size() != 2 * mesh.grid.node_count()) throw InvalidArgument("direction has the wrong size");
  if (step == 0.0) return mesh;
  if (!step_is_valid(mesh, direction, step)) {
    const double admissible = max_admissible_step(mesh, direction, step);
    throw StepTooLargeError("deformation step " + std::to_string(step) + " violates mesh quality; max admissible " +
                                std::to_string(admissible),
                            admissible);
  }
  AdaptedMesh out = mesh;
  auto& x = out.grid.nodes();
  for (int n = 0; n < out.grid.node_count(); ++n) x[n] -= step * direction.segment<2>(2 * n);
  out.curve = out.implied_curve();
  out.morphed = true;
  out.rebuild_boundary();
  return out;
}

double max_nodal_norm(const Eigen::VectorXd& v) {
  double m = 0.0;
  for (int n = 0; n < v.size() / 2; ++n) m = std::max(m, v.segment<2>(2 * n).norm());
  return m;
}

}  // namespace turboshape
