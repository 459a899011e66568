#include "turboshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace turboshape {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct SegmentDistance {
  double distance;
  Vec2 point;
};

SegmentDistance point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 q = a + t * d;
  return {(p - q).norm(), q};
}

// Parameter t in (0,1) along a->b where it meets segment p->q, or nothing.
bool segment_intersection(const Vec2& a, const Vec2& b, const Vec2& p, const Vec2& q, double& t) {
  const Vec2 r = b - a;
  const Vec2 s = q - p;
  const double denom = cross(r, s);
  if (denom == 0.0) return false;
  const Vec2 ap = p - a;
  const double tt = cross(ap, s) / denom;
  const double uu = cross(ap, r) / denom;
  if (tt < 0.0 || tt > 1.0 || uu < 0.0 || uu > 1.0) return false;
  t = tt;
  return true;
}

int orientation_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const int o1 = orientation_sign(a, b, c);
  const int o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a);
  const int o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

// Distance from every node within `radius` of the curve (reference positions);
// other nodes keep +inf. Only grid nodes inside each segment's bounding box are visited.
std::vector<double> near_curve_distances(const StructuredGrid& grid, const BoundaryCurve& curve,
                                         double radius) {
  std::vector<double> dist(grid.node_count(), kInf);
  const double hx = grid.hx();
  const double hy = grid.hy();
  const Vec2& o = grid.origin();
  for (int s = 0; s < curve.size(); ++s) {
    const Vec2& a = curve.segment_start(s);
    const Vec2& b = curve.segment_end(s);
    const int i0 = std::max(0, static_cast<int>(std::floor((std::min(a.x(), b.x()) - radius - o.x()) / hx)));
    const int i1 = std::min(grid.nx(), static_cast<int>(std::ceil((std::max(a.x(), b.x()) + radius - o.x()) / hx)));
    const int j0 = std::max(0, static_cast<int>(std::floor((std::min(a.y(), b.y()) - radius - o.y()) / hy)));
    const int j1 = std::min(grid.ny(), static_cast<int>(std::ceil((std::max(a.y(), b.y()) + radius - o.y()) / hy)));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const int n = grid.node_index(i, j);
        const double d = point_segment(grid.reference_node(n), a, b).distance;
        if (d <= radius && d < dist[n]) dist[n] = d;
      }
    }
  }
  return dist;
}

struct SnapCandidate {
  double distance = kInf;
  int partner = std::numeric_limits<int>::max();
  Vec2 point = Vec2::Zero();
};

// Intersection of the reference edge (lo, hi) with the curve; the crossing
// closest to either endpoint wins, ties resolved toward smaller t.
bool edge_crossing(const StructuredGrid& grid, const BoundaryCurve& curve, int lo, int hi, double& t_out) {
  const Vec2 a = grid.reference_node(lo);
  const Vec2 b = grid.reference_node(hi);
  bool found = false;
  double best_key = kInf;
  double best_t = 0.0;
  for (int s = 0; s < curve.size(); ++s) {
    double t = 0.0;
    if (!segment_intersection(a, b, curve.segment_start(s), curve.segment_end(s), t)) continue;
    const double key = std::min(t, 1.0 - t);
    if (!found || key < best_key || (key == best_key && t < best_t)) {
      found = true;
      best_key = key;
      best_t = t;
    }
  }
  t_out = best_t;
  return found;
}

// Core adaptation restricted to `candidates`; all other nodes and triangles keep
// the state stored in `mesh` (which must already hold positions for them).
void adapt_nodes(AdaptedMesh& mesh, const BoundaryCurve& curve, const std::vector<char>& is_candidate,
                 const std::vector<int>& candidates) {
  const StructuredGrid& grid = mesh.grid;
  const auto near = near_curve_distances(grid, curve, mesh.tol_snap);

  // Pre-snap classification.
  std::vector<NodeSide> pre = mesh.side;
  for (int n : candidates) {
    if (near[n] <= mesh.tol_snap) {
      pre[n] = NodeSide::On;
    } else {
      pre[n] = curve.contains(grid.reference_node(n)) ? NodeSide::Inside : NodeSide::Outside;
    }
  }

  auto& nodes = mesh.grid.nodes();
  for (int a : candidates) {
    nodes[a] = grid.reference_node(a);
    mesh.side[a] = pre[a];
    if (pre[a] == NodeSide::On) continue;
    SnapCandidate best;
    auto [nb, ne] = grid.node_neighbors(a);
    for (const int* it = nb; it != ne; ++it) {
      const int b = *it;
      if (static_cast<int>(pre[a]) * static_cast<int>(pre[b]) != -1) continue;
      const int lo = std::min(a, b);
      const int hi = std::max(a, b);
      double t = 0.0;
      if (!edge_crossing(grid, curve, lo, hi, t)) continue;
      const double frac_a = (a == lo) ? t : 1.0 - t;
      const bool a_nearer = frac_a < 0.5 || (frac_a == 0.5 && a < b);
      if (!a_nearer) continue;
      const Vec2 rlo = grid.reference_node(lo);
      const Vec2 rhi = grid.reference_node(hi);
      const Vec2 x = rlo + t * (rhi - rlo);
      const double d = (x - grid.reference_node(a)).norm();
      if (d < best.distance || (d == best.distance && b < best.partner)) {
        best.distance = d;
        best.partner = b;
        best.point = x;
      }
    }
    if (best.partner != std::numeric_limits<int>::max()) {
      nodes[a] = best.point;
      mesh.side[a] = NodeSide::On;
    }
  }
  (void)is_candidate;
}

// Centroid rule. A triangle whose three vertices all sit on the curve and which
// violates theta_min is a sliver along the boundary and stays outside.
void classify_triangles(AdaptedMesh& mesh, const BoundaryCurve& curve, const std::vector<int>& triangles) {
  const auto& nodes = mesh.grid.nodes();
  for (int t : triangles) {
    const auto& tri = mesh.grid.triangle(t);
    const Vec2 c = (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
    bool in = curve.contains(c);
    if (in && mesh.side[tri[0]] == NodeSide::On && mesh.side[tri[1]] == NodeSide::On &&
        mesh.side[tri[2]] == NodeSide::On) {
      const double area = 0.5 * cross(nodes[tri[1]] - nodes[tri[0]], nodes[tri[2]] - nodes[tri[0]]);
      in = area > 0.0 && min_angle_deg(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) >= mesh.options.theta_min_deg;
    }
    mesh.status[t] = in ? CellStatus::Inside : CellStatus::Outside;
  }
}

void validate_curve_in_holdall(const StructuredGrid& grid, const BoundaryCurve& curve, double tol) {
  for (const auto& p : curve.points()) {
    if (!grid.contains(p, tol)) {
      throw InvalidArgument("boundary curve leaves the hold-all domain");
    }
  }
}

double resolve_tol(const StructuredGrid& grid, const AdaptOptions& options) {
  const double tol = options.tol_snap > 0.0 ? options.tol_snap
                                            : 1e-9 * std::max(grid.extent().x(), grid.extent().y());
  const double min_edge = std::min(grid.hx(), grid.hy());
  if (tol >= 0.5 * min_edge) throw InvalidArgument("tol_snap must be below half the minimum edge length");
  return tol;
}

}  // namespace

// ---------------------------------------------------------------------------
// StructuredGrid

StructuredGrid::StructuredGrid(int nx, int ny, Vec2 origin, Vec2 extent)
    : nx_(nx), ny_(ny), origin_(origin), extent_(extent) {
  if (nx < 2 || ny < 2) throw InvalidArgument("grid needs at least 2 cells per axis");
  if (!(extent.x() > 0.0) || !(extent.y() > 0.0)) throw InvalidArgument("grid extent must be positive");

  nodes_.resize(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int n = 0; n < node_count(); ++n) nodes_[n] = reference_node(n);

  auto topo = std::make_shared<GridTopology>();
  topo->triangles.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = node_index(i, j);
      const int b = node_index(i + 1, j);
      const int c = node_index(i + 1, j + 1);
      const int d = node_index(i, j + 1);
      topo->triangles.push_back({a, b, c});
      topo->triangles.push_back({a, c, d});
    }
  }

  std::vector<std::vector<int>> node_tris(node_count());
  for (int t = 0; t < static_cast<int>(topo->triangles.size()); ++t) {
    for (int n : topo->triangles[t]) node_tris[n].push_back(t);
  }
  topo->node_tri_offsets.push_back(0);
  for (auto& list : node_tris) {
    std::sort(list.begin(), list.end());
    topo->node_tris.insert(topo->node_tris.end(), list.begin(), list.end());
    topo->node_tri_offsets.push_back(static_cast<int>(topo->node_tris.size()));
  }

  topo->node_nbr_offsets.push_back(0);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      std::vector<int> nb;
      const int offsets[6][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}};
      for (const auto& o : offsets) {
        const int ii = i + o[0];
        const int jj = j + o[1];
        if (ii < 0 || jj < 0 || ii > nx || jj > ny) continue;
        nb.push_back(node_index(ii, jj));
      }
      std::sort(nb.begin(), nb.end());
      topo->node_nbrs.insert(topo->node_nbrs.end(), nb.begin(), nb.end());
      topo->node_nbr_offsets.push_back(static_cast<int>(topo->node_nbrs.size()));
    }
  }
  topo_ = std::move(topo);
}

double StructuredGrid::mesh_size() const { return std::min(hx(), hy()); }

double StructuredGrid::max_edge() const { return std::hypot(hx(), hy()); }

Vec2 StructuredGrid::reference_node(int n) const {
  const int i = n % (nx_ + 1);
  const int j = n / (nx_ + 1);
  return {origin_.x() + extent_.x() * i / nx_, origin_.y() + extent_.y() * j / ny_};
}

std::pair<const int*, const int*> StructuredGrid::node_triangles(int n) const {
  const int* base = topo_->node_tris.data();
  return {base + topo_->node_tri_offsets[n], base + topo_->node_tri_offsets[n + 1]};
}

std::pair<const int*, const int*> StructuredGrid::node_neighbors(int n) const {
  const int* base = topo_->node_nbrs.data();
  return {base + topo_->node_nbr_offsets[n], base + topo_->node_nbr_offsets[n + 1]};
}

std::array<int, 2> StructuredGrid::edge_triangles(int a, int b) const {
  std::array<int, 2> out{-1, -1};
  int k = 0;
  auto [ab, ae] = node_triangles(a);
  auto [bb, be] = node_triangles(b);
  for (const int* p = ab; p != ae; ++p) {
    if (std::binary_search(bb, be, *p) && k < 2) out[k++] = *p;
  }
  return out;
}

bool StructuredGrid::contains(const Vec2& p, double tol) const {
  return p.x() >= origin_.x() - tol && p.y() >= origin_.y() - tol && p.x() <= origin_.x() + extent_.x() + tol &&
         p.y() <= origin_.y() + extent_.y() + tol;
}

double StructuredGrid::signed_area(int t) const {
  const auto& tri = triangle(t);
  return 0.5 * cross(nodes_[tri[1]] - nodes_[tri[0]], nodes_[tri[2]] - nodes_[tri[0]]);
}

StructuredGrid build_grid(int nx, int ny, Vec2 origin, Vec2 extent) { return StructuredGrid(nx, ny, origin, extent); }

// ---------------------------------------------------------------------------
// BoundaryCurve

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Dirichlet: return "dirichlet";
    case BoundaryTag::NeumannFixed: return "neumann_fixed";
    case BoundaryTag::NeumannFree: return "neumann_free";
  }
  return "unknown";
}

BoundaryCurve::BoundaryCurve(std::vector<Vec2> points, std::vector<BoundaryTag> tags)
    : points_(std::move(points)), tags_(std::move(tags)) {
  if (points_.size() < 3) throw InvalidArgument("boundary curve needs at least three points");
  if (tags_.size() != points_.size()) throw InvalidArgument("boundary curve needs one tag per segment");
  if (area() < 0.0) {
    // Reverse to counter-clockwise; segment i of the reversed curve is old segment n-2-i.
    const int n = size();
    std::vector<Vec2> p(points_.rbegin(), points_.rend());
    std::vector<BoundaryTag> t(n);
    for (int i = 0; i < n; ++i) t[i] = tags_[((n - 2 - i) % n + n) % n];
    points_ = std::move(p);
    tags_ = std::move(t);
  }
}

double BoundaryCurve::area() const {
  double a = 0.0;
  for (int i = 0; i < size(); ++i) a += cross(segment_start(i), segment_end(i));
  return 0.5 * a;
}

double BoundaryCurve::perimeter() const {
  double l = 0.0;
  for (int i = 0; i < size(); ++i) l += (segment_end(i) - segment_start(i)).norm();
  return l;
}

CurveProjection BoundaryCurve::project(const Vec2& p) const {
  CurveProjection best{kInf, -1, Vec2::Zero()};
  for (int s = 0; s < size(); ++s) {
    const auto d = point_segment(p, segment_start(s), segment_end(s));
    if (d.distance < best.distance) best = {d.distance, s, d.point};
  }
  return best;
}

bool BoundaryCurve::contains(const Vec2& p) const {
  bool in = false;
  const int n = size();
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = points_[i];
    const Vec2& b = points_[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

double BoundaryCurve::hausdorff(const BoundaryCurve& a, const BoundaryCurve& b, int samples_per_segment) {
  auto directed = [samples_per_segment](const BoundaryCurve& from, const BoundaryCurve& to) {
    double h = 0.0;
    for (int s = 0; s < from.size(); ++s) {
      for (int k = 0; k < samples_per_segment; ++k) {
        const double t = static_cast<double>(k) / samples_per_segment;
        const Vec2 p = from.segment_start(s) + t * (from.segment_end(s) - from.segment_start(s));
        h = std::max(h, to.distance(p));
      }
    }
    return h;
  };
  return std::max(directed(a, b), directed(b, a));
}

void BoundaryCurve::validate() const {
  const int n = size();
  if (n < 3) throw InvalidArgument("boundary curve needs at least three points");
  for (int i = 0; i < n; ++i) {
    if ((segment_end(i) - segment_start(i)).norm() == 0.0) {
      throw InvalidArgument("boundary curve has a zero-length segment at index " + std::to_string(i));
    }
  }
  if (!(area() > 0.0)) throw InvalidArgument("boundary curve encloses no area");
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_touch(segment_start(i), segment_end(i), segment_start(j), segment_end(j))) {
        throw InvalidArgument("boundary curve self-intersects (segments " + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// AdaptedMesh

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto angle = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Vec2 u = q - p;
    const Vec2 v = r - p;
    return std::atan2(std::abs(cross(u, v)), u.dot(v));
  };
  const double m = std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
  return m * 180.0 / std::numbers::pi;
}

int AdaptedMesh::inside_count() const {
  return static_cast<int>(std::count(status.begin(), status.end(), CellStatus::Inside));
}

double AdaptedMesh::inside_area() const {
  double a = 0.0;
  for (int t = 0; t < grid.triangle_count(); ++t) {
    if (inside(t)) a += grid.signed_area(t);
  }
  return a;
}

std::vector<bool> AdaptedMesh::active_nodes() const {
  std::vector<bool> active(grid.node_count(), false);
  for (int t = 0; t < grid.triangle_count(); ++t) {
    if (!inside(t)) continue;
    for (int n : grid.triangle(t)) active[n] = true;
  }
  return active;
}

std::vector<bool> AdaptedMesh::nodes_with_tag(BoundaryTag tag) const {
  std::vector<bool> out(grid.node_count(), false);
  for (const auto& e : boundary_edges) {
    if (e.tag == tag) out[e.n0] = out[e.n1] = true;
  }
  return out;
}

std::vector<bool> AdaptedMesh::fixed_nodes() const {
  std::vector<bool> out(grid.node_count(), false);
  for (const auto& e : boundary_edges) {
    if (e.tag != BoundaryTag::NeumannFree) out[e.n0] = out[e.n1] = true;
  }
  return out;
}

double AdaptedMesh::min_inside_angle_deg() const {
  double m = 180.0;
  const auto& x = grid.nodes();
  for (int t = 0; t < grid.triangle_count(); ++t) {
    if (!inside(t)) continue;
    const auto& tri = grid.triangle(t);
    m = std::min(m, min_angle_deg(x[tri[0]], x[tri[1]], x[tri[2]]));
  }
  return m;
}

void AdaptedMesh::rebuild_boundary() {
  boundary_edges.clear();
  boundary_nodes.clear();
  const auto& x = grid.nodes();
  for (int t = 0; t < grid.triangle_count(); ++t) {
    if (!inside(t)) continue;
    const auto& tri = grid.triangle(t);
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      const auto adj = grid.edge_triangles(a, b);
      const int other = adj[0] == t ? adj[1] : adj[0];
      if (other >= 0 && inside(other)) continue;
      BoundaryEdge e;
      e.n0 = a;
      e.n1 = b;
      e.triangle = t;
      const auto proj = curve.project(0.5 * (x[a] + x[b]));
      e.segment = proj.segment;
      e.tag = curve.tag(proj.segment);
      boundary_edges.push_back(e);
    }
  }
  std::vector<char> seen(grid.node_count(), 0);
  for (const auto& e : boundary_edges) {
    for (int n : {e.n0, e.n1}) {
      if (seen[n]) continue;
      seen[n] = 1;
      boundary_nodes.push_back({n, curve.project(x[n]).segment});
    }
  }
  std::sort(boundary_nodes.begin(), boundary_nodes.end(),
            [](const BoundaryNode& l, const BoundaryNode& r) { return l.node < r.node; });
}

void AdaptedMesh::check_quality() const {
  const double theta_min = options.theta_min_deg;
  const auto& x = grid.nodes();
  for (int t = 0; t < grid.triangle_count(); ++t) {
    if (!inside(t)) continue;
    const double area = grid.signed_area(t);
    if (!(area > 0.0)) {
      throw DegenerateMeshError("inside triangle " + std::to_string(t) + " is inverted", t, 0.0);
    }
    const auto& tri = grid.triangle(t);
    const double ang = min_angle_deg(x[tri[0]], x[tri[1]], x[tri[2]]);
    if (ang < theta_min) {
      throw DegenerateMeshError("inside triangle " + std::to_string(t) + " has minimum angle " +
                                    std::to_string(ang) + " deg below theta_min; refine the grid",
                                t, ang);
    }
  }
}

BoundaryCurve AdaptedMesh::implied_curve() const {
  if (boundary_edges.empty()) throw InvalidArgument("mesh has no inside region");
  std::map<int, int> outgoing;
  for (int e = 0; e < static_cast<int>(boundary_edges.size()); ++e) {
    if (!outgoing.emplace(boundary_edges[e].n0, e).second) {
      throw InvalidArgument("inside region boundary is pinched at node " + std::to_string(boundary_edges[e].n0));
    }
  }
  std::vector<Vec2> pts;
  std::vector<BoundaryTag> tags;
  const int start = outgoing.begin()->first;
  int n = start;
  do {
    const auto it = outgoing.find(n);
    if (it == outgoing.end()) throw InvalidArgument("inside region boundary is not closed");
    const auto& e = boundary_edges[it->second];
    pts.push_back(grid.node(n));
    tags.push_back(e.tag);
    n = e.n1;
    if (pts.size() > boundary_edges.size()) throw InvalidArgument("inside region boundary is not closed");
  } while (n != start);
  if (pts.size() != boundary_edges.size()) {
    throw InvalidArgument("inside region is not simply connected");
  }
  return BoundaryCurve(std::move(pts), std::move(tags));
}

// ---------------------------------------------------------------------------
// Adaptation

AdaptedMesh adapt_to_boundary(const StructuredGrid& grid, const BoundaryCurve& curve, const AdaptOptions& options) {
  curve.validate();
  AdaptedMesh mesh;
  mesh.options = options;
  mesh.tol_snap = resolve_tol(grid, options);
  validate_curve_in_holdall(grid, curve, mesh.tol_snap);
  mesh.grid = grid;
  mesh.curve = curve;
  mesh.side.assign(grid.node_count(), NodeSide::Outside);
  mesh.status.assign(grid.triangle_count(), CellStatus::Outside);

  std::vector<int> all(grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) all[n] = n;
  std::vector<char> flag(grid.node_count(), 1);
  adapt_nodes(mesh, curve, flag, all);

  std::vector<int> tris(grid.triangle_count());
  for (int t = 0; t < grid.triangle_count(); ++t) tris[t] = t;
  classify_triangles(mesh, curve, tris);

  mesh.rebuild_boundary();
  mesh.check_quality();
  return mesh;
}

namespace {

ChangeSet diff_meshes(const AdaptedMesh& before, const AdaptedMesh& after, const std::vector<int>& nodes,
                      const std::vector<int>& triangles) {
  ChangeSet cs;
  std::vector<char> node_changed(after.grid.node_count(), 0);
  for (int n : nodes) {
    if (before.grid.node(n) != after.grid.node(n) || before.side[n] != after.side[n]) node_changed[n] = 1;
  }
  // Boundary role changes (edges appearing, vanishing or switching tag).
  auto key = [](const BoundaryEdge& e) { return std::make_tuple(e.n0, e.n1, static_cast<int>(e.tag)); };
  std::vector<std::tuple<int, int, int>> eb, ea;
  for (const auto& e : before.boundary_edges) eb.push_back(key(e));
  for (const auto& e : after.boundary_edges) ea.push_back(key(e));
  std::sort(eb.begin(), eb.end());
  std::sort(ea.begin(), ea.end());
  std::vector<std::tuple<int, int, int>> sym;
  std::set_symmetric_difference(eb.begin(), eb.end(), ea.begin(), ea.end(), std::back_inserter(sym));
  for (const auto& [a, b, tag] : sym) {
    (void)tag;
    node_changed[a] = node_changed[b] = 1;
  }
  for (int n = 0; n < after.grid.node_count(); ++n) {
    if (node_changed[n]) cs.nodes.push_back(n);
  }
  for (int t : triangles) {
    bool changed = before.status[t] != after.status[t];
    for (int n : after.grid.triangle(t)) changed = changed || before.grid.node(n) != after.grid.node(n);
    if (changed) cs.triangles.push_back(t);
  }
  std::sort(cs.triangles.begin(), cs.triangles.end());
  return cs;
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

UpdateResult update_boundary(const AdaptedMesh& mesh, const BoundaryCurve& new_curve,
                             const BoundaryCurve& prev_curve) {
  new_curve.validate();
  const StructuredGrid& grid = mesh.grid;
  const double radius_limit = mesh.options.neighborhood > 0.0 ? mesh.options.neighborhood : 2.0 * grid.max_edge();

  auto full = [&](const std::string& reason) {
    UpdateResult r{adapt_to_boundary(grid, new_curve, mesh.options), {}};
    r.changes = diff_meshes(mesh, r.mesh, iota_vec(grid.node_count()), iota_vec(grid.triangle_count()));
    r.changes.full_readaptation = true;
    r.changes.reason = reason;
    return r;
  };

  if (mesh.morphed) return full("mesh was morphed since its last adaptation");
  const double dh = BoundaryCurve::hausdorff(new_curve, prev_curve);
  if (dh >= radius_limit) return full("deformation exceeds the neighbourhood radius");
  const double area_jump = std::abs(new_curve.area() - prev_curve.area());
  if (area_jump > 2.0 * dh * (new_curve.perimeter() + prev_curve.perimeter()) + 1e-14) {
    return full("curves are not a small deformation of each other");
  }

  AdaptedMesh out = mesh;
  out.curve = new_curve;
  validate_curve_in_holdall(grid, new_curve, out.tol_snap);

  const double r = 2.0 * grid.max_edge() + dh;
  const auto d_prev = near_curve_distances(grid, prev_curve, r);
  const auto d_new = near_curve_distances(grid, new_curve, r);
  std::vector<char> is_candidate(grid.node_count(), 0);
  std::vector<int> candidates;
  for (int n = 0; n < grid.node_count(); ++n) {
    if (d_prev[n] <= r || d_new[n] <= r) {
      is_candidate[n] = 1;
      candidates.push_back(n);
    }
  }
  adapt_nodes(out, new_curve, is_candidate, candidates);

  std::vector<int> tris;
  for (int t = 0; t < grid.triangle_count(); ++t) {
    const auto& tri = grid.triangle(t);
    if (is_candidate[tri[0]] || is_candidate[tri[1]] || is_candidate[tri[2]]) tris.push_back(t);
  }
  classify_triangles(out, new_curve, tris);
  out.rebuild_boundary();
  out.check_quality();

  UpdateResult result{std::move(out), {}};
  result.changes = diff_meshes(mesh, result.mesh, candidates, tris);
  return result;
}

}  // namespace turboshape
