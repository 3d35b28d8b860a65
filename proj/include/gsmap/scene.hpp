#pragma once

#include <vector>

#include "gsmap/grid.hpp"
#include "gsmap/polyline.hpp"

namespace gsmap {

inline constexpr double kDefaultHalfWidth = 0.45;  // meters, ~1.5 px at the default grid
inline constexpr int kDefaultSupersample = 4;

// One ground-truth map element: raw geometry, its fixed-cardinality
// resampling, and the reference binary BEV mask.
struct GroundTruthElement {
  MapClass class_id = MapClass::divider;
  Polyline vertices;
  Polyline resampled;
  DensityMask mask;
  double half_width = kDefaultHalfWidth;
};

struct SceneSpec {
  std::uint64_t seed = 1;
  RasterGrid grid;
  int num_dividers = 2;
  int num_boundaries = 1;
  int num_crossings = 1;
  // Sagitta range (meters) for the parabolic bow of dividers/boundaries.
  double curvature_min = 0.0;
  double curvature_max = 1.5;
  double half_width = kDefaultHalfWidth;
  int supersample = kDefaultSupersample;
  int n_points = kDefaultGaussiansPerElement;
};

struct Scene {
  std::uint64_t seed = 0;
  RasterGrid grid;
  int supersample = kDefaultSupersample;
  int n_points = kDefaultGaussiansPerElement;
  std::vector<GroundTruthElement> elements;
};

namespace detail {

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len_sq = ab.norm_sq();
  if (len_sq == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

inline double distance_to_polyline(Vec2 p, const Polyline& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < poly.points.size(); ++i)
    best = std::min(best, point_segment_distance(p, poly.points[i - 1], poly.points[i]));
  if (poly.closed)
    best = std::min(best, point_segment_distance(p, poly.points.back(), poly.points.front()));
  return best;
}

// Even-odd rule; symmetric under vertex-order reversal.
inline bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[j];
    const Vec2 b = poly[i];
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_int = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < x_int) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

// Rasterizes GT geometry to a binary mask by majority vote over
// supersample^2 sub-positions per pixel. Open polylines become strokes of the
// given half width; closed ones are filled polygons.
inline DensityMask gt_mask(const Polyline& vertices, MapClass /*class_id*/, const RasterGrid& grid,
                           double half_width = kDefaultHalfWidth,
                           int supersample = kDefaultSupersample) {
  validate(grid);
  validate(vertices);
  if (!(half_width > 0.0)) throw ConfigError("gt_mask: half_width must be positive");
  if (supersample < 1) throw ConfigError("gt_mask: supersample must be >= 1");
  if (!(arc_length(vertices) > 0.0)) throw DegenerateGeometryError("gt_mask: zero-length geometry");

  DensityMask mask = DensityMask::zeros(grid);

  // Restrict the supersampling sweep to the geometry's padded bounding box.
  double bx0 = std::numeric_limits<double>::infinity(), bx1 = -bx0;
  double by0 = bx0, by1 = -bx0;
  for (const auto& v : vertices.points) {
    bx0 = std::min(bx0, v.x);
    bx1 = std::max(bx1, v.x);
    by0 = std::min(by0, v.y);
    by1 = std::max(by1, v.y);
  }
  const double pad = (vertices.closed ? 0.0 : half_width) + std::max(grid.dx(), grid.dy());
  const int c0 = std::clamp(static_cast<int>(std::floor((bx0 - pad - grid.x_min) / grid.dx())), 0,
                            grid.width_px);
  const int c1 = std::clamp(static_cast<int>(std::ceil((bx1 + pad - grid.x_min) / grid.dx())) + 1, 0,
                            grid.width_px);
  const int r0 = std::clamp(static_cast<int>(std::floor((by0 - pad - grid.y_min) / grid.dy())), 0,
                            grid.height_px);
  const int r1 = std::clamp(static_cast<int>(std::ceil((by1 + pad - grid.y_min) / grid.dy())) + 1, 0,
                            grid.height_px);

  const int ss = supersample;
  const int majority = ss * ss;  // count*2 >= ss*ss  <=>  at least half
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const Vec2 center = grid.pixel_center(r, c);
      int count = 0;
      for (int si = 0; si < ss; ++si) {
        const double oy = ((si + 0.5) / ss - 0.5) * grid.dy();
        for (int sj = 0; sj < ss; ++sj) {
          const double ox = ((sj + 0.5) / ss - 0.5) * grid.dx();
          const Vec2 p{center.x + ox, center.y + oy};
          const bool in = vertices.closed
                              ? detail::point_in_polygon(p, vertices.points)
                              : detail::distance_to_polyline(p, vertices) <= half_width;
          if (in) ++count;
        }
      }
      mask.at(r, c) = (2 * count >= majority) ? 1.0 : 0.0;
    }
  }
  return mask;
}

namespace detail {

struct LineRecipe {
  MapClass cls;
  double x_lo, x_hi;  // endpoints along the longitudinal axis
  double y_center;
  double sagitta;  // parabola peak offset at mid-span
  double wiggle;   // sine amplitude
  int vertex_count;
};

inline Polyline line_polyline(const LineRecipe& r) {
  Polyline p;
  p.closed = false;
  p.points.resize(static_cast<std::size_t>(r.vertex_count));
  for (int k = 0; k < r.vertex_count; ++k) {
    const double t = static_cast<double>(k) / (r.vertex_count - 1);
    const double xh = 2.0 * t - 1.0;
    const double x = r.x_lo + (r.x_hi - r.x_lo) * t;
    const double y = r.y_center + r.sagitta * (1.0 - xh * xh) + r.wiggle * std::sin(2.0 * M_PI * t);
    p.points[static_cast<std::size_t>(k)] = {x, y};
  }
  return p;
}

inline GroundTruthElement finish_element(MapClass cls, Polyline vertices, const SceneSpec& spec) {
  GroundTruthElement e;
  e.class_id = cls;
  e.half_width = spec.half_width;
  e.resampled = resample_uniform(vertices, spec.n_points);
  e.mask = gt_mask(vertices, cls, spec.grid, spec.half_width, spec.supersample);
  e.vertices = std::move(vertices);
  return e;
}

inline GroundTruthElement make_line_element(MapClass cls, const SceneSpec& spec, Rng& rng) {
  const double w = spec.grid.x_max - spec.grid.x_min;
  const double h = spec.grid.y_max - spec.grid.y_min;
  const double margin = 0.5;

  const double x_lo = spec.grid.x_min + w * rng.uniform(0.03, 0.12);
  const double x_hi = spec.grid.x_max - w * rng.uniform(0.03, 0.12);
  const double sagitta = rng.sign() * rng.uniform(spec.curvature_min, spec.curvature_max);
  const double wiggle = rng.sign() * rng.uniform(0.0, 0.15 * std::abs(sagitta));
  const double y_slack = margin + std::abs(sagitta) + std::abs(wiggle);

  double y_center;
  if (cls == MapClass::boundary) {
    // Boundaries hug the lateral edges of the extent.
    const double lo = 0.22 * h;
    const double hi = 0.5 * h - y_slack;
    if (hi <= lo) throw GenerationError("boundary recipe does not fit the grid extent");
    const double mag = rng.uniform(lo, hi);
    y_center = (spec.grid.y_min + spec.grid.y_max) / 2.0 + rng.sign() * mag;
  } else {
    const double hi = 0.5 * h - y_slack - 0.1 * h;
    if (hi <= 0.0) throw GenerationError("divider recipe does not fit the grid extent");
    y_center = (spec.grid.y_min + spec.grid.y_max) / 2.0 + rng.sign() * rng.uniform(0.0, hi);
  }

  LineRecipe r{cls, x_lo, x_hi, y_center, sagitta, wiggle, 17 + rng.uniform_int(0, 14)};
  if (r.x_hi - r.x_lo <= 2.0) throw GenerationError("line element longer than the usable extent");
  return finish_element(cls, line_polyline(r), spec);
}

inline GroundTruthElement make_crossing_element(const SceneSpec& spec, Rng& rng) {
  const double w = spec.grid.x_max - spec.grid.x_min;
  const double h = spec.grid.y_max - spec.grid.y_min;
  const double hx = rng.uniform(1.2, 2.2);
  const double hy = rng.uniform(1.5, 3.0);
  const double phi = rng.uniform(-0.35, 0.35);
  const double slack = std::hypot(hx, hy) + 0.5;
  if (w / 2.0 <= slack || h / 2.0 <= slack)
    throw GenerationError("crossing recipe does not fit the grid extent");
  const double cx =
      rng.uniform(spec.grid.x_min + slack + 0.08 * w, spec.grid.x_max - slack - 0.08 * w);
  const double cy = rng.uniform(spec.grid.y_min + slack, spec.grid.y_max - slack);

  const double c = std::cos(phi), s = std::sin(phi);
  Polyline quad;
  quad.closed = true;
  const std::pair<double, double> corners[4] = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
  for (const auto& [ux, uy] : corners) {
    const double scale = rng.uniform(0.92, 1.08);
    const double px = ux * scale, py = uy * scale;
    quad.points.push_back({cx + c * px - s * py, cy + s * px + c * py});
  }
  return finish_element(MapClass::ped_crossing, std::move(quad), spec);
}

}  // namespace detail

// Deterministic synthetic BEV scene: dividers and boundaries as bowed
// polylines, pedestrian crossings as convex quadrilaterals, each with its
// reference binary mask.
inline Scene generate_scene(const SceneSpec& spec) {
  validate(spec.grid);
  if (spec.num_dividers < 0 || spec.num_boundaries < 0 || spec.num_crossings < 0)
    throw GenerationError("element counts must be non-negative");
  if (spec.n_points < 2) throw ConfigError("SceneSpec: n_points must be >= 2");
  if (!(spec.curvature_min >= 0.0) || spec.curvature_max < spec.curvature_min)
    throw ConfigError("SceneSpec: invalid curvature range");

  Scene scene;
  scene.seed = spec.seed;
  scene.grid = spec.grid;
  scene.supersample = spec.supersample;
  scene.n_points = spec.n_points;

  Rng rng(spec.seed);
  for (int i = 0; i < spec.num_dividers; ++i)
    scene.elements.push_back(detail::make_line_element(MapClass::divider, spec, rng));
  for (int i = 0; i < spec.num_boundaries; ++i)
    scene.elements.push_back(detail::make_line_element(MapClass::boundary, spec, rng));
  for (int i = 0; i < spec.num_crossings; ++i)
    scene.elements.push_back(detail::make_crossing_element(spec, rng));

  for (const auto& e : scene.elements)
    for (const auto& v : e.vertices.points)
      if (v.x < spec.grid.x_min || v.x > spec.grid.x_max || v.y < spec.grid.y_min ||
          v.y > spec.grid.y_max)
        throw GenerationError("generated vertex escaped the grid extent");
  return scene;
}

}  // namespace gsmap
