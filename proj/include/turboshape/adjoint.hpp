#pragma once

// Discrete shape derivatives of the Weibull objective J1 and the volume J2
// with respect to all node coordinates (interleaved x, y per grid node).

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "turboshape/elasticity.hpp"
#include "turboshape/failure.hpp"

namespace turboshape {

struct StructuralProblem {
  ElasticMaterial material;
  LoadCase load;
  WeibullParams weibull;
  int n_angles = 64;
  SolverOptions solver;
};

/// Case-study problem: BeO-like material, tensile traction of 1000 Pa, m = 5.
StructuralProblem case_study_problem();

struct ObjectivePartials {
  Eigen::VectorXd dJdX;
  Eigen::VectorXd dJdU;
};

double objective_j1(const AdaptedMesh& mesh, const StructuralProblem& prob, const Eigen::VectorXd& u);

ObjectivePartials objective_partials(const AdaptedMesh& mesh, const StructuralProblem& prob,
                                     const Eigen::VectorXd& u);

/// B^T Lambda = dJ/dU on the free DOFs, reusing the primal factorization.
Eigen::VectorXd solve_adjoint(const DisplacementSolver& solver, const Eigen::VectorXd& dJdU);

/// dJ/dX = partial_X J + Lambda^T (dF/dX - dB/dX U).
Eigen::VectorXd total_derivative(const AdaptedMesh& mesh, const StructuralProblem& prob, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& lambda, const Eigen::VectorXd& dJdX_partial,
                                 bool zero_fixed = true);

/// J2: area of the inside region, and its exact derivative.
double volume(const AdaptedMesh& mesh);
Eigen::VectorXd volume_gradient(const AdaptedMesh& mesh, bool zero_fixed = true);

/// Zero the entries of nodes on Dirichlet or Neumann-fixed boundary parts and of inactive nodes.
void zero_fixed_nodes(const AdaptedMesh& mesh, Eigen::VectorXd& g);

/// Nodes on Neumann-free boundary edges that are not also on a fixed part.
std::vector<int> movable_boundary_nodes(const AdaptedMesh& mesh);

struct Evaluation {
  double J1 = 0.0;
  double J2 = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd dJ1;
  Eigen::VectorXd dJ2;
};

/// Assemble, solve, evaluate both objectives and (optionally) their gradients.
Evaluation evaluate(const AdaptedMesh& mesh, const StructuralProblem& prob, bool with_gradients = true);

/// Node positions displaced by t * V with fixed connectivity and cell status.
AdaptedMesh displaced(const AdaptedMesh& mesh, const Eigen::VectorXd& V, double t);

struct FdCheck {
  double directional_adjoint = 0.0;
  double directional_fd = 0.0;
  double best_step = 0.0;
  double plateau_error = 0.0;
  std::vector<double> steps;
  std::vector<double> errors;
};

struct FdReport {
  std::vector<FdCheck> checks;
  double max_error = 0.0;
};

/// Central-difference check of the total derivative along random unit
/// directions supported on the movable boundary nodes. Steps sweep five
/// decades below `base_step`; the reported error is the plateau (minimum).
FdReport check_gradient_fd(const AdaptedMesh& mesh, const StructuralProblem& prob, int n_directions,
                           std::uint64_t seed, double base_step);

}  // namespace turboshape
