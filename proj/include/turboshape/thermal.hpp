#pragma once

// One-dimensional cooling-channel flow coupled to steady 2D heat conduction
// with Robin walls, solved by alternating (Gauss-Seidel) fixed-point iteration.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turboshape/mesh.hpp"

namespace turboshape {

struct ChannelGeometry {
  double length = 0.02;
  int n_cells = 100;
  std::function<double(double)> area = [](double) { return 1e-4; };
  std::function<double(double)> hydraulic_diameter = [](double) { return 0.01; };
  /// Fanning friction factor.
  double friction = 0.0;
  double omega = 0.0;
  /// Distance from the axis of rotation.
  std::function<double(double)> radius = [](double) { return 0.0; };
  double R_s = 287.0;
  double c_p = 1005.0;
  /// Mass flow, kg/s.
  double w = 1e-3;
  double T_in = 600.0;
  double p_in = 1e6;

  void validate() const;
  double dx() const { return length / n_cells; }
  /// Heated perimeter 4A/D_h at x.
  double perimeter(double x) const { return 4.0 * area(x) / hydraulic_diameter(x); }
};

/// Face states 0..n_cells (face 0 is the inlet); cell j is represented by its
/// outlet face j + 1. S holds the per-cell source d(vT)/dx.
struct ChannelState {
  std::vector<double> v, T, p, rho;
  std::vector<double> S;
  int n_cells() const { return static_cast<int>(S.size()); }
  double cell_T(int j) const { return T[j + 1]; }
  double outlet_T() const { return T.back(); }
};

/// Upwind march of d(vT)/dx = S and the momentum balance; S in K m/s per m.
ChannelState march_channel(const ChannelGeometry& geom, const std::vector<double>& S);

/// March driven by the wall heat flow per cell (W): T rises by Phi / (w c_p)
/// across each cell and S is reported as the matching increment of vT.
ChannelState march_heated(const ChannelGeometry& geom, const std::vector<double>& heat);

enum class WallKind { Insulated, Internal, External };

struct ConductionProblem {
  AdaptedMesh mesh;
  /// One entry per mesh.boundary_edges.
  std::vector<WallKind> edge_kind;
  /// Channel cell of each internal edge, -1 elsewhere.
  std::vector<int> edge_cell;
  double k = 25.0;
  double h_int = 5000.0;
  double h_ext = 5000.0;
  double U_ext = 1500.0;
  /// Wall temperature per channel cell.
  std::vector<double> U_int;

  void validate() const;
};

/// Nodal temperatures; inactive nodes are zero.
Eigen::VectorXd solve_conduction(const ConductionProblem& prob);

/// Heat flow from the solid into the channel per cell (W): the Robin flux
/// h_int (U - U_int) integrated over the mapped edges times the perimeter.
std::vector<double> wall_heat(const ConductionProblem& prob, const ChannelGeometry& geom, const Eigen::VectorXd& U,
                              int n_cells);

enum class Verdict { Converged, Diverged, MaxIter };
const char* to_string(Verdict v);

struct CouplingState {
  int iteration = 0;
  std::vector<double> outlet_T;
  std::vector<double> error;
};

enum class InitialGuess { Inlet, Lumped };

struct CouplingOptions {
  /// Inlet: wall at the inlet temperature. Lumped: cell-wise balance with the
  /// heat flow linearized from two uniform-wall conduction solves.
  InitialGuess initial_guess = InitialGuess::Lumped;
  int max_iter = 500;
  /// Sup-norm of successive wall-temperature differences, K.
  double tol = 1e-8;
  /// Under-relaxation of the wall-temperature transfer.
  double relaxation = 1.0;
  int rate_window = 10;
  int growth_limit = 20;
  double blowup_factor = 1e6;
  void validate() const;
};

struct CouplingResult {
  ChannelState channel;
  Eigen::VectorXd U;
  CouplingState state;
  Verdict verdict = Verdict::MaxIter;
  /// Least-squares estimate of the error ratio per iteration over the last window.
  double rate = 0.0;
  std::string reason;
  /// Problem with the last wall temperatures used by the conduction solve.
  ConductionProblem problem;
};

/// Wall temperatures of the lumped initial guess.
std::vector<double> lumped_wall_temperature(const ChannelGeometry& geom, const ConductionProblem& prob);

CouplingResult couple_iterate(const ChannelGeometry& geom, const ConductionProblem& prob,
                              const CouplingOptions& opt = {});

/// |solid wall heat - w c_p (T_out - T_in)| / |solid wall heat|, zero when both vanish.
double energy_balance(const ChannelState& channel, const Eigen::VectorXd& U, const ConductionProblem& prob,
                      const ChannelGeometry& geom);

/// Per-iteration growth factor fitted to log(error) over the last `window` entries.
double estimate_rate(const std::vector<double>& error, int window);

struct StabilityMap {
  std::vector<double> h;
  std::vector<double> k;
  /// verdicts[i][j] for (h[i], k[j]).
  std::vector<std::vector<Verdict>> verdicts;
  std::vector<std::vector<double>> rates;
  /// Per h: smallest k from which every larger k diverges, NaN if none.
  std::vector<double> critical_k;
  /// True when each row is converged below and diverged above its critical k.
  bool monotone = true;
};

StabilityMap stability_map(const ChannelGeometry& geom, const ConductionProblem& prob_template,
                           const std::vector<double>& h_list, const std::vector<double>& k_list,
                           const CouplingOptions& opt = {}, int threads = 1);

/// Reference duct-in-slab configuration: a 0.02 m x 0.01 m slab, cooled from
/// below by a 4-cell channel and heated from above by a 1500 K bath.
struct SlabConfig {
  double length = 0.02;
  double height = 0.01;
  int n_cells = 4;
  int nx = 16;
  int ny = 8;
  double k = 25.0;
  double h = 5000.0;
  double U_ext = 1500.0;
};

ChannelGeometry reference_channel(const SlabConfig& cfg = {});
ConductionProblem slab_problem(const SlabConfig& cfg = {});

}  // namespace turboshape
