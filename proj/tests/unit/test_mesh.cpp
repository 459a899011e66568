#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "turboshape/mesh.hpp"

using namespace turboshape;

namespace {

BoundaryCurve rectangle(double x0, double y0, double x1, double y1) {
  return BoundaryCurve({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}},
                       {BoundaryTag::NeumannFree, BoundaryTag::NeumannFixed, BoundaryTag::NeumannFree,
                        BoundaryTag::Dirichlet});
}

BoundaryCurve circle(Vec2 c, double r, int n) {
  std::vector<Vec2> pts;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    pts.push_back(c + r * Vec2(std::cos(a), std::sin(a)));
  }
  return BoundaryCurve(pts, std::vector<BoundaryTag>(n, BoundaryTag::NeumannFree));
}

void require_same(const AdaptedMesh& a, const AdaptedMesh& b) {
  REQUIRE(a.grid.node_count() == b.grid.node_count());
  for (int n = 0; n < a.grid.node_count(); ++n) {
    REQUIRE(a.grid.node(n).x() == b.grid.node(n).x());
    REQUIRE(a.grid.node(n).y() == b.grid.node(n).y());
    REQUIRE(a.side[n] == b.side[n]);
  }
  REQUIRE(a.status == b.status);
  REQUIRE(a.boundary_edges.size() == b.boundary_edges.size());
  for (std::size_t e = 0; e < a.boundary_edges.size(); ++e) {
    REQUIRE(a.boundary_edges[e].n0 == b.boundary_edges[e].n0);
    REQUIRE(a.boundary_edges[e].n1 == b.boundary_edges[e].n1);
    REQUIRE(a.boundary_edges[e].tag == b.boundary_edges[e].tag);
  }
}

}  // namespace

TEST_CASE("grid counts") {
  auto g = build_grid(45, 25, {0, 0}, {0.9, 0.5});
  CHECK(g.node_count() == 46 * 26);
  CHECK(g.triangle_count() == 2250);

  auto small = build_grid(2, 2, {0, 0}, {1, 1});
  CHECK(small.node_count() == 9);
  CHECK(small.triangle_count() == 8);

  auto g2 = build_grid(10, 6, {0, 0}, {1, 0.6});
  CHECK(g2.node_count() == 77);
  CHECK(g2.triangle_count() == 120);
  for (int t = 0; t < g2.triangle_count(); ++t) CHECK(g2.signed_area(t) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("grid rejects bad dimensions") {
  CHECK_THROWS_AS(build_grid(1, 4, {0, 0}, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(build_grid(4, 4, {0, 0}, {0, 1}), InvalidArgument);
}

TEST_CASE("neighbours and edge triangles") {
  auto g = build_grid(3, 3, {0, 0}, {1, 1});
  auto [b, e] = g.node_neighbors(g.node_index(1, 1));
  CHECK(e - b == 6);
  auto [tb, te] = g.node_triangles(g.node_index(1, 1));
  CHECK(te - tb == 6);
  auto tris = g.edge_triangles(g.node_index(0, 0), g.node_index(1, 1));
  CHECK(tris[0] == 0);
  CHECK(tris[1] == 1);
  auto border = g.edge_triangles(g.node_index(0, 0), g.node_index(1, 0));
  CHECK(border[1] == -1);
}

TEST_CASE("curve orientation and validation") {
  BoundaryCurve cw({{0, 0}, {0, 1}, {1, 1}, {1, 0}},
                   {BoundaryTag::Dirichlet, BoundaryTag::NeumannFree, BoundaryTag::NeumannFixed,
                    BoundaryTag::NeumannFree});
  CHECK(cw.area() == doctest::Approx(1.0));
  // the left edge (x = 0) keeps its Dirichlet tag after reorientation
  auto proj = cw.project({0.0, 0.5});
  CHECK(cw.tag(proj.segment) == BoundaryTag::Dirichlet);

  BoundaryCurve bow({{0, 0}, {1, 1}, {1, 0}, {0, 1}}, std::vector<BoundaryTag>(4, BoundaryTag::NeumannFree));
  CHECK_THROWS_AS(bow.validate(), InvalidArgument);
}

TEST_CASE("aligned rectangle needs no snapping") {
  auto g = build_grid(10, 6, {0, 0}, {1, 0.6});
  auto m = adapt_to_boundary(g, rectangle(0.2, 0.1, 0.8, 0.4));
  for (int n = 0; n < g.node_count(); ++n) {
    CHECK(m.grid.node(n) == g.reference_node(n));
  }
  CHECK(m.inside_count() == 2 * 6 * 3);
  CHECK(m.inside_area() == doctest::Approx(0.18).epsilon(1e-12));
  CHECK(m.boundary_edges.size() == 18);
  for (const auto& bn : m.boundary_nodes) CHECK(m.curve.distance(m.grid.node(bn.node)) <= m.tol_snap);
  auto implied = m.implied_curve();
  CHECK(implied.area() == doctest::Approx(0.18));
}

TEST_CASE("humped curve snaps boundary nodes onto the curve") {
  auto g = build_grid(45, 25, {0, 0}, {0.9, 0.5});
  std::vector<Vec2> pts;
  const int n = 40;
  auto bump = [](double x) {
    const double s = (x - 0.1) / 0.6;
    return (s > 0.05 && s < 0.55) ? 0.05 * (1 - std::cos(2 * std::numbers::pi * (s - 0.05) / 0.5)) : 0.0;
  };
  for (int k = 0; k <= n; ++k) {
    const double x = 0.1 + 0.6 * k / n;
    pts.push_back({x, 0.14 + bump(x)});
  }
  for (int k = n; k >= 0; --k) {
    const double x = 0.1 + 0.6 * k / n;
    pts.push_back({x, 0.24 + bump(x)});
  }
  BoundaryCurve c(pts, std::vector<BoundaryTag>(pts.size(), BoundaryTag::NeumannFree));
  auto m = adapt_to_boundary(g, c);
  for (const auto& bn : m.boundary_nodes) CHECK(c.distance(m.grid.node(bn.node)) <= m.tol_snap);
  CHECK(std::abs(m.inside_area() - c.area()) <= 2 * g.mesh_size() * c.perimeter());
  CHECK(m.min_inside_angle_deg() >= 10.0);
}

TEST_CASE("circle area converges at first order or better") {
  const double r = 0.3;
  std::vector<double> err;
  for (int nx : {10, 20, 40, 80}) {
    auto g = build_grid(nx, nx, {0, 0}, {1, 1});
    auto m = adapt_to_boundary(g, circle({0.5, 0.5}, r, 2000));
    err.push_back(std::abs(m.inside_area() - std::numbers::pi * r * r));
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
  const double order = std::log2(err.front() / err.back()) / 3.0;
  CHECK(order >= 0.9);
}

TEST_CASE("adaptation is idempotent") {
  auto g = build_grid(20, 20, {0, 0}, {1, 1});
  auto c = circle({0.47, 0.52}, 0.31, 97);
  auto m1 = adapt_to_boundary(g, c);
  auto m2 = adapt_to_boundary(m1.grid, c);
  require_same(m1, m2);
}

TEST_CASE("identity update yields an empty change set") {
  auto g = build_grid(20, 20, {0, 0}, {1, 1});
  auto c = circle({0.47, 0.52}, 0.31, 97);
  auto m = adapt_to_boundary(g, c);
  auto r = update_boundary(m, c, c);
  CHECK_FALSE(r.changes.full_readaptation);
  CHECK(r.changes.empty());
  require_same(m, r.mesh);
}

TEST_CASE("small shift touches one layer of triangles") {
  auto g = build_grid(20, 12, {0, 0}, {1, 0.6});
  const double h = g.hx();
  auto c0 = rectangle(0.2, 0.1, 0.8, 0.4);
  auto c1 = rectangle(0.2, 0.1, 0.8 + 0.25 * h, 0.4);
  auto m = adapt_to_boundary(g, c0);
  auto r = update_boundary(m, c1, c0);
  CHECK_FALSE(r.changes.full_readaptation);
  CHECK_FALSE(r.changes.triangles.empty());
  for (int t : r.changes.triangles) {
    for (int n : g.triangle(t)) {
      CHECK(std::abs(g.reference_node(n).x() - 0.8) <= h + 1e-12);
    }
  }
  require_same(r.mesh, adapt_to_boundary(g, c1));
}

TEST_CASE("large shift falls back to full adaptation") {
  auto g = build_grid(20, 12, {0, 0}, {1, 0.6});
  const double h = g.hx();
  auto c0 = rectangle(0.2, 0.1, 0.6, 0.4);
  auto c1 = rectangle(0.2 + 3 * h, 0.1, 0.6 + 3 * h, 0.4);
  auto m = adapt_to_boundary(g, c0);
  auto r = update_boundary(m, c1, c0);
  CHECK(r.changes.full_readaptation);
  require_same(r.mesh, adapt_to_boundary(g, c1));
}

TEST_CASE("incremental update matches fresh adaptation on random perturbations") {
  auto g = build_grid(30, 18, {0, 0}, {1, 0.6});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto base = circle({0.5, 0.3}, 0.2, 96);
  auto prev = base;
  AdaptedMesh mesh = adapt_to_boundary(g, prev);
  int compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    // smooth low-mode radial perturbation of the previous curve
    const double amp = 0.2 * g.hx() * u(rng);
    const int mode = 2 + trial % 4;
    const double phase = 3.0 * u(rng);
    std::vector<Vec2> pts = prev.points();
    for (int k = 0; k < static_cast<int>(pts.size()); ++k) {
      const Vec2 d = (base.point(k) - Vec2(0.5, 0.3)).normalized();
      pts[k] += amp * std::sin(mode * 2.0 * std::numbers::pi * k / pts.size() + phase) * d;
    }
    BoundaryCurve next(pts, prev.tags());
    bool fresh_ok = true;
    AdaptedMesh fresh;
    try {
      fresh = adapt_to_boundary(g, next);
    } catch (const DegenerateMeshError&) {
      fresh_ok = false;
    }
    if (!fresh_ok) {
      CHECK_THROWS_AS(update_boundary(mesh, next, prev), DegenerateMeshError);
      continue;
    }
    auto r = update_boundary(mesh, next, prev);
    CHECK_FALSE(r.changes.full_readaptation);
    require_same(r.mesh, fresh);
    REQUIRE(r.mesh.grid.topology_ptr() == g.topology_ptr());
    mesh = r.mesh;
    prev = next;
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("curve leaving the hold-all is rejected") {
  auto g = build_grid(10, 10, {0, 0}, {1, 1});
  CHECK_THROWS_AS(adapt_to_boundary(g, rectangle(-0.1, 0.2, 0.5, 0.5)), InvalidArgument);
}
