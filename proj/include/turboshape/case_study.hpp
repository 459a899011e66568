#pragma once

// The clamped ceramic bar used for the biobjective study and gradient checks:
// left end clamped, traction on the right end, upper and lower faces free.

#include "turboshape/mesh.hpp"

namespace turboshape {

struct BarSpec {
  int nx = 45;
  int ny = 25;
  Vec2 origin{0.0, 0.0};
  Vec2 extent{0.9, 0.5};
  double x0 = 0.1;
  double length = 0.6;
  double y_lower = 0.14;
  double thickness = 0.1;
  /// Height of the cosine hump lifting both faces over the middle part of the bar.
  double hump = 0.1;
  /// Hump support as fractions of the bar length.
  double hump_begin = 0.05;
  double hump_end = 0.55;
  int points_per_face = 60;
};

/// 45x25 grid on a 0.9 m x 0.5 m hold-all with a 0.6 m x 0.1 m bar.
BarSpec case_study_spec();
/// Coarse 10x6 variant used for quick gradient checks.
BarSpec coarse_bar_spec();

BoundaryCurve bar_curve(const BarSpec& spec);
StructuredGrid bar_grid(const BarSpec& spec);
double hump_profile(const BarSpec& spec, double x);

/// Bar thickness at abscissa x measured on the implied boundary of a mesh
/// (vertical extent of inside triangles crossing x).
double thickness_at(const AdaptedMesh& mesh, double x);

}  // namespace turboshape
