#pragma once

// Biobjective shape optimization of (J1, J2): weighted-sum Armijo descent in
// the elasticity metric, Pareto filtering and weight sweeps.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turboshape/adjoint.hpp"
#include "turboshape/representation.hpp"

namespace turboshape {

struct WeightVector {
  double w1 = 0.5;
  double w2 = 0.5;
  void validate() const;
  /// (a, b) scaled so the components sum to one.
  static WeightVector normalized(double a, double b);
};

double weighted_sum(const std::vector<double>& J, const std::vector<double>& w);
double weighted_sum(double J1, double J2, const WeightVector& w);

/// True iff a <= b componentwise and a != b.
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

struct DescentConfig {
  double c_armijo = 1e-4;
  double rho = 0.5;
  /// Initial trial step as a fraction of the mesh size (largest nodal move).
  double initial_step = 1.0;
  /// Hard bound on the largest nodal move per step, as a fraction of the mesh size.
  double max_step = 1.0;
  int max_iter = 40;
  int max_backtracks = 20;
  /// Stop when the metric norm of the (scaled) weighted gradient falls below this.
  double grad_tol = 1e-8;
  /// Full re-adaptation when a step moves some node by more than this fraction of h.
  double remesh_fraction = 0.8;
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double J1 = 0.0;
  double J2 = 0.0;
  double Jw = 0.0;
  double step = 0.0;
  double grad_norm = 0.0;
  int backtracks = 0;
  bool remeshed = false;
};

/// Objectives are scaled by reference values (the start design) before weighting.
struct ObjectiveScales {
  double J1 = 1.0;
  double J2 = 1.0;
};

struct DescentResult {
  AdaptedMesh mesh;
  std::vector<IterationRecord> log;
  std::string stop_reason;
  double J1 = 0.0;
  double J2 = 0.0;
};

DescentResult descent_loop(const AdaptedMesh& start, const WeightVector& w, const DescentConfig& cfg,
                           const StructuralProblem& prob, const MetricParams& metric = {},
                           const ObjectiveScales& scales = {});

struct ArchiveRecord {
  WeightVector weight;
  double J1 = 0.0;
  double J2 = 0.0;
  double mid_thickness = 0.0;
  std::string stop_reason;
  AdaptedMesh mesh;
  std::vector<IterationRecord> log;
};

class ParetoArchive {
 public:
  void add(ArchiveRecord r) { records_.push_back(std::move(r)); }
  /// Drop every record dominated by another one; equal objective vectors are all kept.
  void filter();
  bool mutually_nondominated() const;
  const std::vector<ArchiveRecord>& records() const { return records_; }
  std::vector<std::string> failures;

 private:
  std::vector<ArchiveRecord> records_;
};

/// One descent per weight (in parallel over `threads` workers); records keep
/// the order of `weights`, then the archive is filtered.
ParetoArchive front_sweep(const AdaptedMesh& start, const std::vector<WeightVector>& weights,
                          const DescentConfig& cfg, const StructuralProblem& prob, const MetricParams& metric = {},
                          int threads = 1, double thickness_x = -1.0);

using InnerProduct = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Negative of the minimum-norm element of the convex hull of the gradients.
Eigen::VectorXd common_descent_direction(const std::vector<Eigen::VectorXd>& grads, const InnerProduct& inner = {});

}  // namespace turboshape
