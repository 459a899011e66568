#pragma once

// Probabilistic failure objectives: the Weibull volume functional for
// ceramics and the surface LCF functional built on Coffin-Manson-Basquin life.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turboshape/elasticity.hpp"

namespace turboshape {

struct WeibullParams {
  double m = 5.0;
  double sigma0 = 1.0;
  void validate() const;
};

/// Mean over the unit circle of ((sigma_n)_+ / sigma0)^m, trapezoid rule on n_angles directions.
double weibull_density(const Eigen::Matrix2d& sigma, const WeibullParams& p, int n_angles = 64);

/// d(density)/d(sigma) as a symmetric matrix G with d(density) = G : d(sigma).
Eigen::Matrix2d weibull_density_gradient(const Eigen::Matrix2d& sigma, const WeibullParams& p, int n_angles = 64);

/// J1 = sum over inside triangles of area * density.
double weibull_functional(const AdaptedMesh& mesh, const StressField& stress, const WeibullParams& p,
                          int n_angles = 64);

/// 1 - exp(-J), or 1 - exp(-n^m J) when a cycle count is given.
double pof_from_intensity(double J, std::optional<double> n_cycles = std::nullopt, double m = 1.0);

struct CMBParams {
  double E = 200e9;
  double sigma_f = 1.0e9;
  double eps_f = 0.3;
  double b = -0.08;
  double c = -0.6;
  double m_lcf = 3.0;
  /// Support factor 1 + c1 * chi^c2; c1 = 0 disables it.
  double c1 = 0.0;
  double c2 = 1.0;
  void validate() const;
};

inline constexpr double kInfiniteLife = std::numeric_limits<double>::infinity();

/// Strain amplitude of the strain-life curve at N cycles (right-hand side of the CMB relation).
double cmb_strain_amplitude(double N, const CMBParams& p);

/// Deterministic life N solving eps_a / n_chi = (sigma_f/E)(2N)^b + eps_f (2N)^c; +inf for eps_a = 0.
double cmb_det_life(double eps_a, double chi, const CMBParams& p);

double support_factor(double chi, double c1, double c2);

/// Per boundary edge (midpoint) values of the LCF pipeline.
struct LifeField {
  std::vector<double> eps_a;
  std::vector<double> chi;
  std::vector<double> n_det;
  std::vector<double> integrand;
};

struct LcfResult {
  double J_R = 0.0;
  /// Weibull scale of the life distribution, J_R^(-1/m); +inf when J_R = 0.
  double eta = kInfiniteLife;
  std::string strain_rule = "von_mises_over_E";
  LifeField field;
};

/// Normalized von Mises gradient |grad s_vM| / s_vM per triangle, recovered by a
/// least-squares linear fit over the triangle and its node neighbours.
std::vector<double> normalized_stress_gradient(const AdaptedMesh& mesh, const StressField& stress);

LcfResult lcf_functional(const AdaptedMesh& mesh, const StressField& stress, const CMBParams& p);
LcfResult lcf_functional(const AdaptedMesh& mesh, const ElasticMaterial& mat, const Eigen::VectorXd& u,
                         const CMBParams& p);

}  // namespace turboshape
