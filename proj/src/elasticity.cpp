#include "turboshape/elasticity.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

namespace turboshape {

ElasticMaterial ElasticMaterial::from_young(double E, double nu, Kinematics k) {
  if (!(E > 0.0) || !(nu > -1.0 && nu < 0.5)) throw InvalidArgument("need E > 0 and -1 < nu < 0.5");
  ElasticMaterial m;
  m.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  m.mu = E / (2.0 * (1.0 + nu));
  m.kinematics = k;
  return m;
}

double ElasticMaterial::young() const { return mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu); }

double ElasticMaterial::poisson() const { return lambda / (2.0 * (lambda + mu)); }

double ElasticMaterial::lambda_2d() const {
  return kinematics == Kinematics::PlaneStress ? 2.0 * lambda * mu / (lambda + 2.0 * mu) : lambda;
}

void ElasticMaterial::validate() const {
  if (!(mu > 0.0)) throw InvalidArgument("Lame mu must be positive");
  if (!(lambda + mu > 0.0)) throw InvalidArgument("Lame constants need lambda + mu > 0");
  if (kinematics == Kinematics::PlaneStress && !(lambda + 2.0 * mu > 0.0)) {
    throw InvalidArgument("plane stress needs lambda + 2 mu > 0");
  }
}

P1Element p1_element(const Vec2& x0, const Vec2& x1, const Vec2& x2) {
  const double det = (x1.x() - x0.x()) * (x2.y() - x0.y()) - (x2.x() - x0.x()) * (x1.y() - x0.y());
  P1Element e;
  e.area = 0.5 * det;
  e.grad << x1.y() - x2.y(), x2.x() - x1.x(),
            x2.y() - x0.y(), x0.x() - x2.x(),
            x0.y() - x1.y(), x1.x() - x0.x();
  e.grad /= det;
  return e;
}

Eigen::Matrix3d constitutive_matrix(double lambda, double mu) {
  Eigen::Matrix3d D;
  D << lambda + 2.0 * mu, lambda, 0.0,
       lambda, lambda + 2.0 * mu, 0.0,
       0.0, 0.0, mu;
  return D;
}

Eigen::Matrix<double, 3, 6> strain_matrix(const P1Element& e) {
  Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
  for (int i = 0; i < 3; ++i) {
    const double gx = e.grad(i, 0);
    const double gy = e.grad(i, 1);
    B(0, 2 * i) = gx;
    B(1, 2 * i + 1) = gy;
    B(2, 2 * i) = gy;
    B(2, 2 * i + 1) = gx;
  }
  return B;
}

ElementMatrix element_stiffness(const P1Element& e, double lambda, double mu) {
  const auto B = strain_matrix(e);
  return e.area * B.transpose() * constitutive_matrix(lambda, mu) * B;
}

namespace {

P1Element element_of(const AdaptedMesh& mesh, int t) {
  const auto& tri = mesh.grid.triangle(t);
  return p1_element(mesh.grid.node(tri[0]), mesh.grid.node(tri[1]), mesh.grid.node(tri[2]));
}

// Node -> incident boundary edges in the order of mesh.boundary_edges.
std::vector<std::vector<int>> edges_by_node(const AdaptedMesh& mesh) {
  std::vector<std::vector<int>> out(mesh.grid.node_count());
  for (int e = 0; e < static_cast<int>(mesh.boundary_edges.size()); ++e) {
    out[mesh.boundary_edges[e].n0].push_back(e);
    out[mesh.boundary_edges[e].n1].push_back(e);
  }
  return out;
}

void assemble_row(int a, const AdaptedMesh& mesh, const ElasticMaterial& mat, const LoadCase& load,
                  const std::vector<int>& node_edges, BlockRow& row, Eigen::VectorXd& F) {
  row.cols.clear();
  row.blocks.clear();
  Vec2 f = Vec2::Zero();
  const double lam = mat.lambda_2d();
  auto [tb, te] = mesh.grid.node_triangles(a);
  for (const int* it = tb; it != te; ++it) {
    const int t = *it;
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const P1Element el = element_of(mesh, t);
    const ElementMatrix K = element_stiffness(el, lam, mat.mu);
    const int la = static_cast<int>(std::find(tri.begin(), tri.end(), a) - tri.begin());
    for (int j = 0; j < 3; ++j) {
      const int b = tri[j];
      const auto pos = std::lower_bound(row.cols.begin(), row.cols.end(), b);
      const auto k = pos - row.cols.begin();
      if (pos == row.cols.end() || *pos != b) {
        row.cols.insert(pos, b);
        row.blocks.insert(row.blocks.begin() + k, Eigen::Matrix2d::Zero());
      }
      row.blocks[k] += K.block<2, 2>(2 * la, 2 * j);
    }
    f += load.force_on(t) * (el.area / 3.0);
  }
  for (int e : node_edges) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::NeumannFixed) continue;
    const double len = (mesh.grid.node(be.n1) - mesh.grid.node(be.n0)).norm();
    f += load.traction * (0.5 * len);
  }
  F[2 * a] = f.x();
  F[2 * a + 1] = f.y();
}

void finalize_dofs(ElasticSystem& s, const AdaptedMesh& mesh) {
  s.active = mesh.active_nodes();
  s.clamped = mesh.nodes_with_tag(BoundaryTag::Dirichlet);
  s.free_dofs.clear();
  s.dof_to_free.assign(s.dof_count(), -1);
  bool any_clamp = false;
  for (int n = 0; n < s.node_count; ++n) {
    if (!s.active[n]) continue;
    if (s.clamped[n]) {
      any_clamp = true;
      continue;
    }
    for (int k = 0; k < 2; ++k) {
      s.dof_to_free[2 * n + k] = static_cast<int>(s.free_dofs.size());
      s.free_dofs.push_back(2 * n + k);
    }
  }
  if (!any_clamp) throw SingularSystemError("elasticity system has no Dirichlet constraint");
}

}  // namespace

ElasticSystem assemble(const AdaptedMesh& mesh, const ElasticMaterial& mat, const LoadCase& load) {
  mat.validate();
  ElasticSystem s;
  s.node_count = mesh.grid.node_count();
  s.rows.assign(s.node_count, {});
  s.F = Eigen::VectorXd::Zero(s.dof_count());
  const auto node_edges = edges_by_node(mesh);
  for (int a = 0; a < s.node_count; ++a) assemble_row(a, mesh, mat, load, node_edges[a], s.rows[a], s.F);
  finalize_dofs(s, mesh);
  return s;
}

void reassemble(ElasticSystem& s, const AdaptedMesh& mesh, const ElasticMaterial& mat, const LoadCase& load,
                const ChangeSet& changes) {
  if (changes.full_readaptation || s.node_count != mesh.grid.node_count()) {
    s = assemble(mesh, mat, load);
    return;
  }
  std::vector<char> dirty(s.node_count, 0);
  for (int n : changes.nodes) dirty[n] = 1;
  for (int t : changes.triangles) {
    for (int n : mesh.grid.triangle(t)) dirty[n] = 1;
  }
  const auto node_edges = edges_by_node(mesh);
  for (int a = 0; a < s.node_count; ++a) {
    if (dirty[a]) assemble_row(a, mesh, mat, load, node_edges[a], s.rows[a], s.F);
  }
  finalize_dofs(s, mesh);
}

Eigen::SparseMatrix<double> ElasticSystem::matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  for (int a = 0; a < node_count; ++a) {
    const auto& row = rows[a];
    for (std::size_t k = 0; k < row.cols.size(); ++k) {
      const int b = row.cols[k];
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) trip.emplace_back(2 * a + i, 2 * b + j, row.blocks[k](i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> M(dof_count(), dof_count());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::SparseMatrix<double> ElasticSystem::reduced_matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  for (int a = 0; a < node_count; ++a) {
    const auto& row = rows[a];
    for (std::size_t k = 0; k < row.cols.size(); ++k) {
      const int b = row.cols[k];
      for (int i = 0; i < 2; ++i) {
        const int r = dof_to_free[2 * a + i];
        if (r < 0) continue;
        for (int j = 0; j < 2; ++j) {
          const int c = dof_to_free[2 * b + j];
          if (c >= 0) trip.emplace_back(r, c, row.blocks[k](i, j));
        }
      }
    }
  }
  const int n = static_cast<int>(free_dofs.size());
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::VectorXd ElasticSystem::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(free_dofs.size());
  for (std::size_t i = 0; i < free_dofs.size(); ++i) r[i] = full[free_dofs[i]];
  return r;
}

Eigen::VectorXd ElasticSystem::expand(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(dof_count());
  for (std::size_t i = 0; i < free_dofs.size(); ++i) full[free_dofs[i]] = reduced[i];
  return full;
}

Eigen::VectorXd ElasticSystem::apply(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dof_count());
  for (int a = 0; a < node_count; ++a) {
    const auto& row = rows[a];
    Vec2 acc = Vec2::Zero();
    for (std::size_t k = 0; k < row.cols.size(); ++k) acc += row.blocks[k] * nodal(u, row.cols[k]);
    out[2 * a] = acc.x();
    out[2 * a + 1] = acc.y();
  }
  return out;
}

struct DisplacementSolver::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
};

DisplacementSolver::DisplacementSolver(const ElasticSystem& system, SolverOptions options)
    : system_(system), options_(options), reduced_(system.reduced_matrix()), impl_(std::make_unique<Impl>()) {
  if (reduced_.rows() == 0) throw SingularSystemError("elasticity system has no free degrees of freedom");
  if (options_.method == SolverOptions::Method::Direct) {
    impl_->ldlt.compute(reduced_);
    if (impl_->ldlt.info() != Eigen::Success) {
      throw SingularSystemError("sparse factorization of the elasticity system failed");
    }
    const auto& d = impl_->ldlt.vectorD();
    if ((d.array() <= 0.0).any()) {
      throw SingularSystemError("elasticity system is not positive definite");
    }
  } else {
    impl_->cg.setTolerance(options_.tol_lin);
    impl_->cg.setMaxIterations(options_.max_iter);
    impl_->cg.compute(reduced_);
  }
}

DisplacementSolver::~DisplacementSolver() = default;

Eigen::VectorXd DisplacementSolver::solve(const Eigen::VectorXd& rhs) const {
  const Eigen::VectorXd b = system_.reduce(rhs);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(system_.dof_count());
  Eigen::VectorXd x;
  if (options_.method == SolverOptions::Method::Direct) {
    x = impl_->ldlt.solve(b);
  } else {
    x = impl_->cg.solve(b);
  }
  const double res = (reduced_ * x - b).norm() / bnorm;
  if (!(res <= options_.tol_lin)) {
    throw SolverError("linear solve did not reach tol_lin (relative residual " + std::to_string(res) + ")", res);
  }
  return system_.expand(x);
}

Eigen::VectorXd solve_displacement(const ElasticSystem& system, const SolverOptions& options) {
  DisplacementSolver solver(system, options);
  return solver.solve(system.F);
}

StressField compute_stress(const AdaptedMesh& mesh, const ElasticMaterial& mat, const Eigen::VectorXd& u) {
  StressField s;
  const int nt = mesh.grid.triangle_count();
  s.sigma.assign(nt, Eigen::Matrix2d::Zero());
  s.strain.assign(nt, Eigen::Matrix2d::Zero());
  const double lam = mat.lambda_2d();
  for (int t = 0; t < nt; ++t) {
    if (!mesh.inside(t)) continue;
    const auto& tri = mesh.grid.triangle(t);
    const P1Element el = element_of(mesh, t);
    Eigen::Matrix2d grad_u = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 3; ++i) grad_u += nodal(u, tri[i]) * el.grad.row(i);
    const Eigen::Matrix2d eps = 0.5 * (grad_u + grad_u.transpose());
    s.strain[t] = eps;
    s.sigma[t] = lam * eps.trace() * Eigen::Matrix2d::Identity() + 2.0 * mat.mu * eps;
  }
  return s;
}

double normal_stress(const Eigen::Matrix2d& sigma, const Vec2& n) {
  if (std::abs(n.squaredNorm() - 1.0) > 1e-12) throw InvalidArgument("normal_stress needs a unit normal");
  return n.dot(sigma * n);
}

double von_mises(const Eigen::Matrix2d& s) {
  const double xx = s(0, 0);
  const double yy = s(1, 1);
  const double xy = 0.5 * (s(0, 1) + s(1, 0));
  return std::sqrt(std::max(0.0, xx * xx - xx * yy + yy * yy + 3.0 * xy * xy));
}

}  // namespace turboshape
