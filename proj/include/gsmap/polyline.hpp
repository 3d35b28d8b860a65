#pragma once

#include <vector>

#include "gsmap/gaussian.hpp"

namespace gsmap {

// Ordered vertex sequence in meters. For closed polylines the segment from
// the last vertex back to the first is implicit; the first vertex is never
// repeated.
struct Polyline {
  std::vector<Vec2> points;
  bool closed = false;
};

inline void validate(const Polyline& p) {
  if (p.points.size() < 2) throw DegenerateGeometryError("polyline needs at least 2 points");
  for (const auto& v : p.points)
    if (!v.finite()) throw DegenerateGeometryError("polyline has non-finite vertex");
  if (p.closed) {
    const Vec2 a = p.points.front();
    const Vec2 b = p.points.back();
    if (a.x == b.x && a.y == b.y)
      throw DegenerateGeometryError("closed polyline must not repeat its first vertex");
  }
}

inline double arc_length(const Polyline& p) {
  validate(p);
  double len = 0.0;
  for (std::size_t i = 1; i < p.points.size(); ++i) len += (p.points[i] - p.points[i - 1]).norm();
  if (p.closed) len += (p.points.front() - p.points.back()).norm();
  return len;
}

// The ordered Gaussian centers read off as vertices.
inline Polyline vectorize(const MapElement& e) {
  validate(e);
  Polyline out;
  out.closed = e.closed;
  out.points.reserve(e.gaussians.size());
  for (const auto& g : e.gaussians) out.points.push_back({g.mu_x, g.mu_y});
  return out;
}

// n points at equal arc-length spacing. Open polylines keep both endpoints
// exactly; closed ones are spaced around the loop starting at the first
// vertex.
inline Polyline resample_uniform(const Polyline& p, int n) {
  validate(p);
  if (n < 2) throw ConfigError("resample_uniform: n must be >= 2");

  std::vector<Vec2> verts = p.points;
  if (p.closed) verts.push_back(p.points.front());

  std::vector<double> cum(verts.size(), 0.0);
  for (std::size_t i = 1; i < verts.size(); ++i)
    cum[i] = cum[i - 1] + (verts[i] - verts[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0.0)) throw DegenerateGeometryError("resample_uniform: zero-length polyline");

  Polyline out;
  out.closed = p.closed;
  out.points.resize(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    if (!p.closed && k == 0) {
      out.points[0] = p.points.front();
      continue;
    }
    if (!p.closed && k == n - 1) {
      out.points[static_cast<std::size_t>(k)] = p.points.back();
      continue;
    }
    const double s = p.closed ? total * k / n : total * k / (n - 1);
    while (seg + 2 < verts.size() && cum[seg + 1] < s) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    const double t = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
    out.points[static_cast<std::size_t>(k)] = verts[seg] + (verts[seg + 1] - verts[seg]) * t;
  }
  return out;
}

// Symmetric mean nearest-point distance between two point sets.
inline double chamfer_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.empty() || b.empty()) throw DegenerateGeometryError("chamfer_distance: empty point set");
  const auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm_sq());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

inline constexpr int kDefaultChamferSamples = 100;

inline double chamfer_distance(const Polyline& a, const Polyline& b,
                               int samples = kDefaultChamferSamples) {
  if (samples < 2) throw ConfigError("chamfer_distance: samples must be >= 2");
  return chamfer_distance(resample_uniform(a, samples).points, resample_uniform(b, samples).points);
}

// Index bijection between a prediction's points and GT points. Forward maps
// i -> (shift + i) mod n, reversed maps i -> (shift - i) mod n. Open elements
// only use identity {fwd, 0} and full reversal {rev, n-1}.
struct PointOrdering {
  bool reversed = false;
  int shift = 0;

  int map(int i, int n) const {
    const int j = reversed ? shift - i : shift + i;
    return ((j % n) + n) % n;
  }
  bool operator==(const PointOrdering&) const = default;
};

// Manhattan point cost of Eq-style index-wise matching: sum_i |mu_i -
// gt_{pi(i)}|_1 under the given ordering.
inline double vector_loss(const MapElement& pred, const Polyline& gt, const PointOrdering& ordering) {
  validate(pred);
  const int n = static_cast<int>(pred.gaussians.size());
  if (static_cast<int>(gt.points.size()) != n)
    throw ShapeError("vector_loss: GT cardinality must equal the element's Gaussian count");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& g = pred.gaussians[static_cast<std::size_t>(i)];
    const Vec2 t = gt.points[static_cast<std::size_t>(ordering.map(i, n))];
    sum += std::abs(g.mu_x - t.x) + std::abs(g.mu_y - t.y);
  }
  return sum;
}

namespace detail {

// Candidate orderings in tie-break priority: identity first, then (for
// closed elements) the remaining forward shifts, then all reversed shifts.
inline std::vector<PointOrdering> candidate_orderings(bool closed, int n) {
  std::vector<PointOrdering> out;
  if (closed) {
    out.reserve(static_cast<std::size_t>(2 * n));
    for (int s = 0; s < n; ++s) out.push_back({false, s});
    for (int s = 0; s < n; ++s) out.push_back({true, s});
  } else {
    out.push_back({false, 0});
    out.push_back({true, n - 1});
  }
  return out;
}

}  // namespace detail

// Minimizes vector_loss over {identity, reversal} for open elements and over
// all 2N cyclic-shift x direction orderings for closed ones. Ties keep the
// earliest candidate.
inline PointOrdering best_point_ordering(const MapElement& pred, const Polyline& gt) {
  validate(pred);
  const int n = static_cast<int>(pred.gaussians.size());
  if (static_cast<int>(gt.points.size()) != n)
    throw ShapeError("best_point_ordering: cardinality mismatch");
  PointOrdering best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& cand : detail::candidate_orderings(pred.closed, n)) {
    const double loss = vector_loss(pred, gt, cand);
    if (loss < best_loss) {
      best_loss = loss;
      best = cand;
    }
  }
  return best;
}

}  // namespace gsmap
