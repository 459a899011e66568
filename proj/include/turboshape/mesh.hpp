#pragma once

// Structured triangular grids on a rectangular hold-all domain and their
// adaptation to a moving boundary by node snapping (composite finite elements).
//
// The grid topology never changes after construction: adaptation only moves
// node coordinates and flags triangles as inside or outside the component.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turboshape/errors.hpp"

namespace turboshape {

using Vec2 = Eigen::Vector2d;

/// Immutable connectivity of a structured grid, shared between all meshes
/// derived from the same grid.
struct GridTopology {
  std::vector<std::array<int, 3>> triangles;
  // node -> adjacent triangles (ascending), CSR layout
  std::vector<int> node_tri_offsets;
  std::vector<int> node_tris;
  // node -> neighbouring nodes through a grid edge (ascending, self excluded)
  std::vector<int> node_nbr_offsets;
  std::vector<int> node_nbrs;
};

class StructuredGrid {
 public:
  StructuredGrid() = default;
  StructuredGrid(int nx, int ny, Vec2 origin, Vec2 extent);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Vec2& origin() const { return origin_; }
  const Vec2& extent() const { return extent_; }
  double hx() const { return extent_.x() / nx_; }
  double hy() const { return extent_.y() / ny_; }
  /// Smallest cell width; the optimizer's step bound.
  double mesh_size() const;
  /// Longest reference edge (the cell diagonal).
  double max_edge() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int triangle_count() const { return static_cast<int>(topo_->triangles.size()); }
  int node_index(int i, int j) const { return j * (nx_ + 1) + i; }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  std::vector<Vec2>& nodes() { return nodes_; }
  const Vec2& node(int n) const { return nodes_[n]; }
  /// Position of node n on the undeformed regular grid.
  Vec2 reference_node(int n) const;

  const std::vector<std::array<int, 3>>& triangles() const { return topo_->triangles; }
  const std::array<int, 3>& triangle(int t) const { return topo_->triangles[t]; }
  const GridTopology& topology() const { return *topo_; }
  const std::shared_ptr<const GridTopology>& topology_ptr() const { return topo_; }

  /// Triangles adjacent to node n, ascending.
  std::pair<const int*, const int*> node_triangles(int n) const;
  /// Grid-edge neighbours of node n, ascending.
  std::pair<const int*, const int*> node_neighbors(int n) const;
  /// Triangles sharing the edge (a, b): one or two entries, -1 padded.
  std::array<int, 2> edge_triangles(int a, int b) const;

  bool contains(const Vec2& p, double tol = 0.0) const;
  double signed_area(int t) const;

 private:
  int nx_ = 0;
  int ny_ = 0;
  Vec2 origin_ = Vec2::Zero();
  Vec2 extent_ = Vec2::Zero();
  std::vector<Vec2> nodes_;
  std::shared_ptr<const GridTopology> topo_;
};

StructuredGrid build_grid(int nx, int ny, Vec2 origin, Vec2 extent);

enum class BoundaryTag : std::uint8_t { Dirichlet, NeumannFixed, NeumannFree };

std::string to_string(BoundaryTag tag);

struct CurveProjection {
  double distance = 0.0;
  int segment = -1;
  Vec2 point = Vec2::Zero();
};

/// Closed, counter-clockwise polygon describing the component boundary.
/// Segment i runs from points[i] to points[(i + 1) % n] and carries tags[i].
class BoundaryCurve {
 public:
  BoundaryCurve() = default;
  BoundaryCurve(std::vector<Vec2> points, std::vector<BoundaryTag> tags);

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<BoundaryTag>& tags() const { return tags_; }
  const Vec2& point(int i) const { return points_[i]; }
  const Vec2& segment_start(int s) const { return points_[s]; }
  const Vec2& segment_end(int s) const { return points_[(s + 1) % size()]; }
  BoundaryTag tag(int s) const { return tags_[s]; }

  double area() const;
  double perimeter() const;
  CurveProjection project(const Vec2& p) const;
  double distance(const Vec2& p) const { return project(p).distance; }
  /// Even-odd point-in-polygon test; points on the curve give an arbitrary answer.
  bool contains(const Vec2& p) const;

  /// Directed Hausdorff-type distance, sampled along segments of both curves.
  static double hausdorff(const BoundaryCurve& a, const BoundaryCurve& b, int samples_per_segment = 4);

  /// Simple-polygon checks: at least three points, positive area, no crossings.
  void validate() const;

  bool operator==(const BoundaryCurve& other) const = default;

 private:
  std::vector<Vec2> points_;
  std::vector<BoundaryTag> tags_;
};

enum class CellStatus : std::uint8_t { Outside = 0, Inside = 1 };
enum class NodeSide : std::int8_t { Outside = -1, On = 0, Inside = 1 };

struct BoundaryNode {
  int node = -1;
  int segment = -1;
};

/// Edge of the inside region, oriented with the component on its left.
struct BoundaryEdge {
  int n0 = -1;
  int n1 = -1;
  int triangle = -1;
  int segment = -1;
  BoundaryTag tag = BoundaryTag::NeumannFree;
};

struct AdaptOptions {
  double theta_min_deg = 10.0;
  /// Snap tolerance; <= 0 selects 1e-9 * max(extent).
  double tol_snap = -1.0;
  /// Neighbourhood radius for incremental updates; <= 0 selects 2 * max_edge.
  double neighborhood = -1.0;
};

class AdaptedMesh {
 public:
  StructuredGrid grid;
  BoundaryCurve curve;
  std::vector<CellStatus> status;
  /// Side of each node's reference position relative to the curve (On for snapped nodes).
  std::vector<NodeSide> side;
  std::vector<BoundaryNode> boundary_nodes;
  std::vector<BoundaryEdge> boundary_edges;
  AdaptOptions options;
  double tol_snap = 0.0;
  /// Set once nodes were moved away from their snapped positions (mesh morphing).
  bool morphed = false;

  bool inside(int t) const { return status[t] == CellStatus::Inside; }
  int inside_count() const;
  double inside_area() const;
  /// Nodes that belong to at least one inside triangle.
  std::vector<bool> active_nodes() const;
  /// Per-node flags for nodes touching a boundary edge with the given tag.
  std::vector<bool> nodes_with_tag(BoundaryTag tag) const;
  /// Nodes on Dirichlet or Neumann-fixed edges.
  std::vector<bool> fixed_nodes() const;
  double min_inside_angle_deg() const;

  /// Closed loop of boundary nodes (counter-clockwise) with the tag of each outgoing edge.
  BoundaryCurve implied_curve() const;

  /// Recompute boundary edges/nodes from the current status and curve.
  void rebuild_boundary();
  /// Throws DegenerateMeshError if an inside triangle violates orientation or theta_min.
  void check_quality() const;
};

struct ChangeSet {
  bool full_readaptation = false;
  std::string reason;
  std::vector<int> nodes;      // position, side or boundary role changed
  std::vector<int> triangles;  // status changed or a vertex moved
  bool empty() const { return nodes.empty() && triangles.empty(); }
};

AdaptedMesh adapt_to_boundary(const StructuredGrid& grid, const BoundaryCurve& curve,
                              const AdaptOptions& options = {});

struct UpdateResult {
  AdaptedMesh mesh;
  ChangeSet changes;
};

UpdateResult update_boundary(const AdaptedMesh& mesh, const BoundaryCurve& new_curve,
                             const BoundaryCurve& prev_curve);

/// Minimum interior angle of a triangle, degrees.
double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace turboshape
