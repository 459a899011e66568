#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "turboshape/adjoint.hpp"
#include "turboshape/case_study.hpp"
#include "turboshape/elasticity.hpp"
#include "turboshape/representation.hpp"

using namespace turboshape;

namespace {

constexpr auto D = BoundaryTag::Dirichlet;
constexpr auto NF = BoundaryTag::NeumannFixed;
constexpr auto FR = BoundaryTag::NeumannFree;

AdaptedMesh strip() {
  auto g = build_grid(24, 8, {0, 0}, {1.2, 0.4});
  return adapt_to_boundary(g, BoundaryCurve({{0.1, 0.1}, {1.1, 0.1}, {1.1, 0.3}, {0.1, 0.3}}, {FR, NF, FR, D}));
}

std::vector<int> bottom_nodes(const AdaptedMesh& m) {
  std::vector<int> out;
  for (int i = 2; i <= 22; ++i) out.push_back(m.grid.node_index(i, 2));
  return out;
}

double h1_seminorm(const AdaptedMesh& m, const Eigen::VectorXd& v) {
  double s = 0.0;
  for (int t = 0; t < m.grid.triangle_count(); ++t) {
    if (!m.inside(t)) continue;
    const auto& tri = m.grid.triangle(t);
    const auto el = p1_element(m.grid.node(tri[0]), m.grid.node(tri[1]), m.grid.node(tri[2]));
    Eigen::Matrix2d gv = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 3; ++i) gv += nodal(v, tri[i]) * el.grad.row(i);
    s += el.area * gv.squaredNorm();
  }
  return std::sqrt(s);
}

double total_variation(const std::vector<double>& x) {
  double tv = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) tv += std::abs(x[i] - x[i - 1]);
  return tv;
}

double max_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("representation is linear, clamped and positive") {
  auto m = strip();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  const int n = 2 * m.grid.node_count();
  Eigen::VectorXd r1(n), r2(n);
  for (int i = 0; i < n; ++i) {
    r1[i] = nd(rng);
    r2[i] = nd(rng);
  }
  zero_fixed_nodes(m, r1);
  zero_fixed_nodes(m, r2);
  CHECK(represent_gradient(m, Eigen::VectorXd::Zero(n)).norm() == 0.0);
  auto s1 = represent_gradient(m, r1);
  auto s2 = represent_gradient(m, r2);
  auto s12 = represent_gradient(m, 2.5 * r1 - 0.7 * r2);
  CHECK((s12 - (2.5 * s1 - 0.7 * s2)).norm() <= 1e-12 * s12.norm());
  const auto clamped = metric_clamped_nodes(m);
  for (int k = 0; k < m.grid.node_count(); ++k) {
    if (clamped[k]) CHECK(nodal(s1, k).norm() == 0.0);
  }
  MetricParams metric;
  CHECK(r1.dot(s1) == doctest::Approx(metric_inner(m, metric, s1, s1)).epsilon(1e-10));
  CHECK(r1.dot(s1) > 0.0);
}

TEST_CASE("metric without clamp is singular") {
  auto g = build_grid(8, 8, {0, 0}, {1, 1});
  auto m = adapt_to_boundary(g, BoundaryCurve({{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}},
                                              {FR, FR, FR, FR}));
  Eigen::VectorXd r = Eigen::VectorXd::Ones(2 * g.node_count());
  CHECK_THROWS_AS(represent_gradient(m, r), SingularSystemError);
}

TEST_CASE("spike sensitivity is smoothed") {
  auto m = strip();
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(2 * m.grid.node_count());
  const int spike = m.grid.node_index(12, 2);
  raw[2 * spike + 1] = 1.0;
  auto s = represent_gradient(m, raw);
  // decays monotonically away from the spike along the bottom face
  for (int i = 12; i < 21; ++i) CHECK(std::abs(s[2 * m.grid.node_index(i + 1, 2) + 1]) < std::abs(s[2 * m.grid.node_index(i, 2) + 1]));
  for (int i = 12; i > 3; --i) CHECK(std::abs(s[2 * m.grid.node_index(i - 1, 2) + 1]) < std::abs(s[2 * m.grid.node_index(i, 2) + 1]));
  // scale-free comparison of the H1 seminorms
  CHECK(h1_seminorm(m, s) / max_nodal_norm(s) <= h1_seminorm(m, raw) / max_nodal_norm(raw));
}

TEST_CASE("boundary smoothing of a constant load is a bubble") {
  auto m = strip();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * m.grid.node_count());
  for (int n : bottom_nodes(m)) b[2 * n + 1] = 1.0;
  auto s = dtn_smooth(m, b);
  std::vector<double> prof;
  for (int n : bottom_nodes(m)) prof.push_back(s[2 * n + 1]);
  CHECK(prof.front() == 0.0);  // clamped corner node
  CHECK(prof.back() == 0.0);
  for (std::size_t i = 1; i + 1 < prof.size(); ++i) CHECK(prof[i] > 0.0);
  CHECK(dtn_smooth(m, Eigen::VectorXd::Zero(b.size())).norm() == 0.0);
}

TEST_CASE("boundary smoothing reduces total variation") {
  auto m = strip();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * m.grid.node_count());
  std::vector<double> in;
  int sign = 1;
  for (int n : bottom_nodes(m)) {
    b[2 * n + 1] = sign;
    in.push_back(sign);
    sign = -sign;
  }
  auto s = dtn_smooth(m, b);
  std::vector<double> out;
  for (int n : bottom_nodes(m)) out.push_back(s[2 * n + 1]);
  CHECK(total_variation(out) / max_abs(out) < total_variation(in) / max_abs(in));
}

TEST_CASE("deformation along the represented gradient") {
  const auto spec = coarse_bar_spec();
  auto m = adapt_to_boundary(bar_grid(spec), bar_curve(spec));
  auto prob = case_study_problem();
  auto ev = evaluate(m, prob);
  auto s = represent_gradient(m, ev.dJ1);
  const double slope = ev.dJ1.dot(s);
  CHECK(slope > 0.0);

  auto same = deform_mesh(m, s, 0.0);
  CHECK(same.grid.nodes() == m.grid.nodes());

  const double tau = 1e-4 * m.grid.mesh_size() / max_nodal_norm(s);
  auto moved = deform_mesh(m, s, tau);
  CHECK(moved.morphed);
  CHECK(moved.grid.topology_ptr() == m.grid.topology_ptr());
  const double J = evaluate(moved, prob, false).J1;
  const double predicted = ev.J1 - tau * slope;
  CHECK(std::abs(J - predicted) < 1e-3 * std::abs(ev.J1 - J));

  // a huge step inverts triangles: rejected, admissible step reported
  const double huge = 5.0 * m.grid.mesh_size() / max_nodal_norm(s);
  try {
    deform_mesh(m, s, huge);
    FAIL("expected StepTooLargeError");
  } catch (const StepTooLargeError& e) {
    CHECK(e.max_admissible_step() > 0.0);
    CHECK(e.max_admissible_step() < huge);
    CHECK_NOTHROW(deform_mesh(m, s, e.max_admissible_step()));
  }
}
