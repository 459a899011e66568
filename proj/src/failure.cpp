#include "turboshape/failure.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/tools/roots.hpp>
#include <Eigen/Dense>

namespace turboshape {

namespace {

void check_angles(int n_angles) {
  if (n_angles < 8) throw InvalidArgument("n_angles must be at least 8");
}

template <class F>
void for_each_direction(int n_angles, F&& f) {
  for (int k = 0; k < n_angles; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n_angles;
    f(Vec2(std::cos(th), std::sin(th)));
  }
}

}  // namespace

void WeibullParams::validate() const {
  if (!(m >= 1.0)) throw InvalidArgument("Weibull m must be >= 1");
  if (!(sigma0 > 0.0)) throw InvalidArgument("Weibull sigma0 must be positive");
}

double weibull_density(const Eigen::Matrix2d& sigma, const WeibullParams& p, int n_angles) {
  check_angles(n_angles);
  double acc = 0.0;
  for_each_direction(n_angles, [&](const Vec2& n) {
    const double sn = n.dot(sigma * n);
    if (sn > 0.0) acc += std::pow(sn / p.sigma0, p.m);
  });
  return acc / n_angles;
}

Eigen::Matrix2d weibull_density_gradient(const Eigen::Matrix2d& sigma, const WeibullParams& p, int n_angles) {
  check_angles(n_angles);
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
  for_each_direction(n_angles, [&](const Vec2& n) {
    const double sn = n.dot(sigma * n);
    if (sn > 0.0) G += (p.m / p.sigma0) * std::pow(sn / p.sigma0, p.m - 1.0) * (n * n.transpose());
  });
  return G / n_angles;
}

double weibull_functional(const AdaptedMesh& mesh, const StressField& stress, const WeibullParams& p, int n_angles) {
  p.validate();
  double J = 0.0;
  for (int t = 0; t < mesh.grid.triangle_count(); ++t) {
    if (!mesh.inside(t)) continue;
    J += mesh.grid.signed_area(t) * weibull_density(stress.sigma[t], p, n_angles);
  }
  return J;
}

double pof_from_intensity(double J, std::optional<double> n_cycles, double m) {
  if (!(J >= 0.0)) throw InvalidArgument("failure intensity must be non-negative");
  double nu = J;
  if (n_cycles) {
    if (!(*n_cycles >= 0.0)) throw InvalidArgument("cycle count must be non-negative");
    nu = std::pow(*n_cycles, m) * J;
  }
  return -std::expm1(-nu);
}

void CMBParams::validate() const {
  if (!(E > 0.0)) throw InvalidArgument("CMB: E must be positive");
  if (!(sigma_f > 0.0) || !(eps_f > 0.0)) throw InvalidArgument("CMB: sigma_f and eps_f must be positive");
  if (!(b < 0.0) || !(c < 0.0)) throw InvalidArgument("CMB: exponents b and c must be negative");
  if (!(m_lcf >= 1.0)) throw InvalidArgument("CMB: LCF Weibull m must be >= 1");
  if (!(c1 >= 0.0) || !(c2 > 0.0)) throw InvalidArgument("CMB: support factor needs c1 >= 0 and c2 > 0");
}

double cmb_strain_amplitude(double N, const CMBParams& p) {
  const double twoN = 2.0 * N;
  return p.sigma_f / p.E * std::pow(twoN, p.b) + p.eps_f * std::pow(twoN, p.c);
}

double cmb_det_life(double eps_a, double chi, const CMBParams& p) {
  if (!(eps_a >= 0.0)) throw InvalidArgument("strain amplitude must be non-negative");
  if (eps_a == 0.0) return kInfiniteLife;
  const double target = eps_a / support_factor(chi, p.c1, p.c2);
  const double a = p.sigma_f / p.E;
  // residual in t = ln(2N), strictly decreasing
  auto g = [&](double t) { return a * std::exp(p.b * t) + p.eps_f * std::exp(p.c * t) - target; };
  double lo = 0.0;
  double hi = 10.0;
  while (g(lo) < 0.0) lo -= 10.0;
  while (g(hi) > 0.0) {
    hi += 10.0;
    if (hi > 1e4) return kInfiniteLife;
  }
  boost::uintmax_t iters = 200;
  const auto [l, r] = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  double t = 0.5 * (l + r);
  // one Newton polish on the bracketed root
  const double dg = a * p.b * std::exp(p.b * t) + p.eps_f * p.c * std::exp(p.c * t);
  if (dg != 0.0) {
    const double tn = t - g(t) / dg;
    if (tn >= l && tn <= r) t = tn;
  }
  return 0.5 * std::exp(t);
}

double support_factor(double chi, double c1, double c2) {
  if (!(chi >= 0.0)) throw InvalidArgument("normalized stress gradient must be non-negative");
  if (c1 == 0.0 || chi == 0.0) return 1.0;
  return 1.0 + c1 * std::pow(chi, c2);
}

std::vector<double> normalized_stress_gradient(const AdaptedMesh& mesh, const StressField& stress) {
  const auto& g = mesh.grid;
  const int nt = g.triangle_count();
  std::vector<double> vm(nt, 0.0);
  std::vector<Vec2> centroid(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = g.triangle(t);
    centroid[t] = (g.node(tri[0]) + g.node(tri[1]) + g.node(tri[2])) / 3.0;
    if (mesh.inside(t)) vm[t] = von_mises(stress.sigma[t]);
  }
  std::vector<double> chi(nt, 0.0);
  std::vector<int> patch;
  for (int t = 0; t < nt; ++t) {
    if (!mesh.inside(t) || vm[t] == 0.0) continue;
    patch.clear();
    for (int n : g.triangle(t)) {
      auto [b, e] = g.node_triangles(n);
      for (const int* it = b; it != e; ++it) {
        if (mesh.inside(*it)) patch.push_back(*it);
      }
    }
    std::sort(patch.begin(), patch.end());
    patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    if (patch.size() < 3) continue;
    Eigen::MatrixXd A(patch.size(), 3);
    Eigen::VectorXd y(patch.size());
    for (std::size_t i = 0; i < patch.size(); ++i) {
      const Vec2 d = centroid[patch[i]] - centroid[t];
      A.row(i) << 1.0, d.x(), d.y();
      y[i] = vm[patch[i]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < 3) continue;
    const Eigen::Vector3d coef = qr.solve(y);
    chi[t] = std::hypot(coef[1], coef[2]) / vm[t];
  }
  return chi;
}

LcfResult lcf_functional(const AdaptedMesh& mesh, const StressField& stress, const CMBParams& p) {
  p.validate();
  LcfResult r;
  const auto chi_tri = normalized_stress_gradient(mesh, stress);
  const std::size_t ne = mesh.boundary_edges.size();
  r.field.eps_a.resize(ne);
  r.field.chi.resize(ne);
  r.field.n_det.resize(ne);
  r.field.integrand.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& be = mesh.boundary_edges[e];
    const double len = (mesh.grid.node(be.n1) - mesh.grid.node(be.n0)).norm();
    const double eps_a = von_mises(stress.sigma[be.triangle]) / p.E;
    const double chi = chi_tri[be.triangle];
    const double N = cmb_det_life(eps_a, chi, p);
    const double f = std::isinf(N) ? 0.0 : std::pow(1.0 / N, p.m_lcf);
    r.field.eps_a[e] = eps_a;
    r.field.chi[e] = chi;
    r.field.n_det[e] = N;
    r.field.integrand[e] = f;
    r.J_R += len * f;
  }
  r.eta = r.J_R > 0.0 ? std::pow(r.J_R, -1.0 / p.m_lcf) : kInfiniteLife;
  return r;
}

LcfResult lcf_functional(const AdaptedMesh& mesh, const ElasticMaterial& mat, const Eigen::VectorXd& u,
                         const CMBParams& p) {
  return lcf_functional(mesh, compute_stress(mesh, mat, u), p);
}

}  // namespace turboshape
