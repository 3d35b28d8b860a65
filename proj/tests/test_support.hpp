// Shared helpers for the test suites: random primitives, finite-difference
// harnesses and oracle-style reference implementations that stay independent
// of the library code paths they check.
#pragma once

#include <functional>
#include <vector>

#include "gsmap/gsmap.hpp"

namespace gsmap::testing {

inline Gaussian2D random_gaussian(Rng& rng, double extent = 5.0) {
  Gaussian2D g;
  g.mu_x = rng.uniform(-extent, extent);
  g.mu_y = rng.uniform(-extent, extent);
  g.sigma_x = rng.uniform(0.2, 2.5);
  g.sigma_y = rng.uniform(0.2, 2.5);
  g.theta = rng.uniform(-1.5, 1.5);
  return g;
}

inline MapElement random_element(Rng& rng, int n, const RasterGrid& grid, bool closed = false,
                                 MapClass cls = MapClass::divider) {
  MapElement e;
  e.class_id = cls;
  e.closed = closed;
  e.score.fill(0.0);
  e.score[static_cast<std::size_t>(static_cast<int>(cls))] = 1.0;
  const double mx = 0.1 * (grid.x_max - grid.x_min);
  const double my = 0.1 * (grid.y_max - grid.y_min);
  for (int i = 0; i < n; ++i) {
    Gaussian2D g;
    g.mu_x = rng.uniform(grid.x_min + mx, grid.x_max - mx);
    g.mu_y = rng.uniform(grid.y_min + my, grid.y_max - my);
    g.sigma_x = rng.uniform(0.2, 1.5);
    g.sigma_y = rng.uniform(0.1, 0.8);
    g.theta = rng.uniform(-1.5, 1.5);
    e.gaussians.push_back(g);
  }
  return e;
}

// Central finite difference of a scalar function of one Gaussian parameter.
inline double central_difference(const std::function<double(const Gaussian2D&)>& f, Gaussian2D g,
                                 int param, double step) {
  double* fields[5] = {&g.mu_x, &g.mu_y, &g.sigma_x, &g.sigma_y, &g.theta};
  const double saved = *fields[param];
  *fields[param] = saved + step;
  const double hi = f(g);
  *fields[param] = saved - step;
  const double lo = f(g);
  return (hi - lo) / (2.0 * step);
}

// Central finite difference over every parameter of an element.
inline std::vector<ParamGrad> element_central_difference(
    const std::function<double(const MapElement&)>& f, const MapElement& e, double step) {
  std::vector<ParamGrad> out(e.gaussians.size(), ParamGrad{0, 0, 0, 0, 0});
  MapElement probe = e;
  for (std::size_t i = 0; i < e.gaussians.size(); ++i) {
    double* fields[5] = {&probe.gaussians[i].mu_x, &probe.gaussians[i].mu_y,
                         &probe.gaussians[i].sigma_x, &probe.gaussians[i].sigma_y,
                         &probe.gaussians[i].theta};
    for (int k = 0; k < 5; ++k) {
      const double saved = *fields[k];
      *fields[k] = saved + step;
      const double hi = f(probe);
      *fields[k] = saved - step;
      const double lo = f(probe);
      *fields[k] = saved;
      out[i][static_cast<std::size_t>(k)] = (hi - lo) / (2.0 * step);
    }
  }
  return out;
}

inline double relative_error(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

// 2x2 symmetric eigenvalues, closed form.
inline std::pair<double, double> sym_eigenvalues(const Mat2& m) {
  const double tr = m.trace();
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * m.det()));
  return {(tr - disc) / 2.0, (tr + disc) / 2.0};
}

// GT scene derived from a map itself: vertices are the Gaussian centers and
// masks are the binarized renders, so the map is a pixel-perfect prediction
// of the scene.
inline Scene scene_from_map(const GaussianMap& map, const RasterGrid& grid,
                            double binarize_at = 0.5) {
  Scene scene;
  scene.grid = grid;
  scene.n_points = map.elements.empty() ? kDefaultGaussiansPerElement
                                        : static_cast<int>(map.elements.front().gaussians.size());
  for (const auto& e : map.elements) {
    GroundTruthElement gt;
    gt.class_id = e.class_id;
    gt.vertices = vectorize(e);
    gt.resampled = resample_uniform(gt.vertices, static_cast<int>(e.gaussians.size()));
    gt.mask = binarize(render_element(e, grid, kNoCutoff), binarize_at);
    scene.elements.push_back(std::move(gt));
  }
  return scene;
}

// Straight multi-vertex polyline helper.
inline Polyline segment_polyline(Vec2 a, Vec2 b, int vertices = 2) {
  Polyline p;
  for (int i = 0; i < vertices; ++i) {
    const double t = static_cast<double>(i) / (vertices - 1);
    p.points.push_back(a + (b - a) * t);
  }
  return p;
}

}  // namespace gsmap::testing
