#pragma once

// Elasticity-metric (Steklov-Poincare) representation of raw shape
// sensitivities and the mesh deformation along the represented field.

#include <vector>

#include <Eigen/Core>

#include "turboshape/mesh.hpp"

namespace turboshape {

struct MetricParams {
  double lambda = 0.0;
  double mu = 1.0;
  /// Optional per-triangle mu; overrides mu when non-empty.
  std::vector<double> mu_field;
  void validate() const;
};

/// Hook for automatic Lame-parameter selection; returns the input unchanged.
MetricParams select_lame_parameters(const AdaptedMesh& mesh, const MetricParams& metric);

/// Nodes clamped in the metric problem (Dirichlet and Neumann-fixed parts).
std::vector<bool> metric_clamped_nodes(const AdaptedMesh& mesh);

/// Solves a(s, v) = <raw, v> for all admissible v; s vanishes on clamped nodes.
Eigen::VectorXd represent_gradient(const AdaptedMesh& mesh, const Eigen::VectorXd& raw,
                                   const MetricParams& metric = {});

/// a(x, y) of the metric bilinear form.
double metric_inner(const AdaptedMesh& mesh, const MetricParams& metric, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y);

/// Boundary smoothing: values on the movable boundary nodes are used as the
/// load of the metric problem and the trace of the solution on those nodes is returned.
Eigen::VectorXd dtn_smooth(const AdaptedMesh& mesh, const Eigen::VectorXd& boundary_values,
                           const MetricParams& metric = {});

/// Largest t in [0, step] for which X - t d keeps all inside triangles valid.
double max_admissible_step(const AdaptedMesh& mesh, const Eigen::VectorXd& direction, double step);

/// X <- X - step * direction on the active nodes. The boundary becomes the
/// implied curve of the moved mesh; cell status is kept. Throws
/// StepTooLargeError (mesh unchanged) if quality or hold-all bounds fail.
AdaptedMesh deform_mesh(const AdaptedMesh& mesh, const Eigen::VectorXd& direction, double step);

/// Largest nodal displacement of the field, in m.
double max_nodal_norm(const Eigen::VectorXd& v);

}  // namespace turboshape
