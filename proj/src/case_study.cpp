#include "turboshape/case_study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace turboshape {

BarSpec case_study_spec() { return BarSpec{}; }

BarSpec coarse_bar_spec() {
  BarSpec s;
  s.nx = 10;
  s.ny = 6;
  s.extent = {1.0, 0.6};
  s.x0 = 0.2;
  s.length = 0.6;
  s.y_lower = 0.2;
  s.thickness = 0.2;
  s.hump = 0.04;
  s.points_per_face = 24;
  return s;
}

double hump_profile(const BarSpec& spec, double x) {
  const double s = (x - spec.x0) / spec.length;
  if (s <= spec.hump_begin || s >= spec.hump_end) return 0.0;
  const double phase = (s - spec.hump_begin) / (spec.hump_end - spec.hump_begin);
  return 0.5 * spec.hump * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
}

BoundaryCurve bar_curve(const BarSpec& spec) {
  const int n = spec.points_per_face;
  std::vector<Vec2> pts;
  std::vector<BoundaryTag> tags;
  for (int k = 0; k < n; ++k) {
    const double x = spec.x0 + spec.length * k / n;
    pts.push_back({x, spec.y_lower + hump_profile(spec, x)});
    tags.push_back(BoundaryTag::NeumannFree);
  }
  const double x1 = spec.x0 + spec.length;
  pts.push_back({x1, spec.y_lower});
  tags.push_back(BoundaryTag::NeumannFixed);
  for (int k = n; k > 0; --k) {
    const double x = spec.x0 + spec.length * k / n;
    pts.push_back({x, spec.y_lower + spec.thickness + hump_profile(spec, x)});
    tags.push_back(BoundaryTag::NeumannFree);
  }
  pts.push_back({spec.x0, spec.y_lower + spec.thickness});
  tags.push_back(BoundaryTag::Dirichlet);
  return BoundaryCurve(std::move(pts), std::move(tags));
}

StructuredGrid bar_grid(const BarSpec& spec) { return build_grid(spec.nx, spec.ny, spec.origin, spec.extent); }

double thickness_at(const AdaptedMesh& mesh, double x) {
  const BoundaryCurve c = mesh.implied_curve();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int s = 0; s < c.size(); ++s) {
    const Vec2& a = c.segment_start(s);
    const Vec2& b = c.segment_end(s);
    if ((a.x() - x) * (b.x() - x) > 0.0 || a.x() == b.x()) continue;
    const double y = a.y() + (b.y() - a.y()) * (x - a.x()) / (b.x() - a.x());
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  return hi > lo ? hi - lo : 0.0;
}

}  // namespace turboshape
