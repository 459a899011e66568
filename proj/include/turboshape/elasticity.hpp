#pragma once

// P1 linear elasticity on the inside triangles of an adapted mesh.
//
// Unknowns are interleaved per grid node (ux0, uy0, ux1, ...); rows of nodes
// outside the component stay empty so that the DOF numbering never changes.

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "turboshape/mesh.hpp"

namespace turboshape {

enum class Kinematics { PlaneStress, PlaneStrain };

/// Isotropic material given by its (three-dimensional) Lamé constants.
struct ElasticMaterial {
  double lambda = 0.0;
  double mu = 0.0;
  Kinematics kinematics = Kinematics::PlaneStress;

  static ElasticMaterial from_young(double E, double nu, Kinematics k = Kinematics::PlaneStress);
  double young() const;
  double poisson() const;
  /// First Lamé constant entering the 2D constitutive law (2 lambda mu / (lambda + 2 mu) in plane stress).
  double lambda_2d() const;
  void validate() const;
};

struct LoadCase {
  Vec2 body_force = Vec2::Zero();
  /// Optional per-triangle body force; overrides body_force when non-empty.
  std::vector<Vec2> cell_body_force;
  /// Traction on Neumann-fixed boundary edges.
  Vec2 traction = Vec2::Zero();

  Vec2 force_on(int triangle) const {
    return cell_body_force.empty() ? body_force : cell_body_force[triangle];
  }
};

/// Area and shape-function gradients of a P1 triangle.
struct P1Element {
  double area = 0.0;
  Eigen::Matrix<double, 3, 2> grad;
};

P1Element p1_element(const Vec2& x0, const Vec2& x1, const Vec2& x2);

/// Voigt constitutive matrix for (exx, eyy, gxy).
Eigen::Matrix3d constitutive_matrix(double lambda, double mu);

/// 3x6 strain-displacement matrix of a P1 element.
Eigen::Matrix<double, 3, 6> strain_matrix(const P1Element& e);

using ElementMatrix = Eigen::Matrix<double, 6, 6>;
ElementMatrix element_stiffness(const P1Element& e, double lambda, double mu);

/// One block row of the stiffness matrix: 2x2 couplings to neighbouring nodes, sorted by column node.
struct BlockRow {
  std::vector<int> cols;
  std::vector<Eigen::Matrix2d> blocks;
};

struct SolverOptions {
  enum class Method { Direct, ConjugateGradient };
  Method method = Method::Direct;
  double tol_lin = 1e-10;
  int max_iter = 20000;
};

class ElasticSystem {
 public:
  int node_count = 0;
  std::vector<BlockRow> rows;
  Eigen::VectorXd F;
  std::vector<bool> active;
  std::vector<bool> clamped;
  /// DOFs kept in the reduced system, ascending.
  std::vector<int> free_dofs;
  /// Full DOF -> position in the reduced system, or -1.
  std::vector<int> dof_to_free;

  int dof_count() const { return 2 * node_count; }
  Eigen::SparseMatrix<double> matrix() const;
  Eigen::SparseMatrix<double> reduced_matrix() const;
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const;
  /// B * u over the full DOF numbering.
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
};

ElasticSystem assemble(const AdaptedMesh& mesh, const ElasticMaterial& mat, const LoadCase& load);

/// Rebuild only the rows touched by `changes`; the result equals a full assemble().
void reassemble(ElasticSystem& system, const AdaptedMesh& mesh, const ElasticMaterial& mat, const LoadCase& load,
                const ChangeSet& changes);

/// Factorized reduced system; reused for adjoint solves (B is symmetric).
class DisplacementSolver {
 public:
  DisplacementSolver(const ElasticSystem& system, SolverOptions options = {});
  ~DisplacementSolver();
  DisplacementSolver(const DisplacementSolver&) = delete;
  DisplacementSolver& operator=(const DisplacementSolver&) = delete;

  /// Solves B x = rhs on the free DOFs; rhs and result use the full numbering.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  struct Impl;
  const ElasticSystem& system_;
  SolverOptions options_;
  Eigen::SparseMatrix<double> reduced_;
  std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd solve_displacement(const ElasticSystem& system, const SolverOptions& options = {});

inline Vec2 nodal(const Eigen::VectorXd& u, int n) { return {u[2 * n], u[2 * n + 1]}; }

struct StressField {
  std::vector<Eigen::Matrix2d> sigma;
  std::vector<Eigen::Matrix2d> strain;
};

/// Element-constant stress and strain; zero on outside triangles.
StressField compute_stress(const AdaptedMesh& mesh, const ElasticMaterial& mat, const Eigen::VectorXd& u);

/// n . sigma n; throws InvalidArgument for a non-unit normal.
double normal_stress(const Eigen::Matrix2d& sigma, const Vec2& n);

/// Plane-stress von Mises equivalent of an in-plane stress tensor.
double von_mises(const Eigen::Matrix2d& sigma);

}  // namespace turboshape
