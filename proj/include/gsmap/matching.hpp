#pragma once

#include <vector>

#include "gsmap/losses.hpp"

namespace gsmap {

// Cross-class pairs get this finite sentinel instead of +inf so the
// assignment solver stays total.
inline constexpr double kCrossClassCost = 1e6;

struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  static CostMatrix create(int rows, int cols, double fill = 0.0) {
    return {rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, fill)};
  }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct MatchResult {
  struct Pair {
    int pred_index = -1;
    int gt_index = -1;
    PointOrdering ordering;
    double cost = 0.0;
  };
  // Per-prediction GT index, -1 for background.
  std::vector<int> assignment;
  std::vector<Pair> pairs;
  double total_cost = 0.0;
};

// Hybrid instance matching cost: classification + N-normalized Manhattan
// point cost under the best ordering + rasterized IoU cost.
inline double instance_cost(const MapElement& pred, const GroundTruthElement& gt,
                            const RasterGrid& grid, double cutoff_sigmas = kDefaultCutoffSigmas) {
  const int n = static_cast<int>(pred.gaussians.size());
  const Polyline gt_pts = detail::gt_points_for(gt, n);
  const double cls = focal_cls_cost(pred.score, gt.class_id);
  const double point = vector_loss(pred, gt_pts, best_point_ordering(pred, gt_pts)) / n;
  const double iou = soft_iou(render_element(pred, grid, cutoff_sigmas), gt.mask);
  return cls + point + (1.0 - iou);
}

// Exact Kuhn-Munkres in O(n^3) via row potentials. Rectangular inputs are
// padded to square with high-cost dummies; every real row/column can still be
// left unmatched only when the other side runs out, so the result is a
// min-cost one-to-one assignment of size min(rows, cols). Returns the
// per-prediction column (-1 = background).
inline std::vector<int> hungarian_assign(const CostMatrix& cost) {
  for (double v : cost.values)
    if (!std::isfinite(v)) throw InvalidCostError("hungarian_assign: non-finite cost entry");
  if (cost.rows == 0 || cost.cols == 0) return std::vector<int>(static_cast<std::size_t>(cost.rows), -1);

  const int n = std::max(cost.rows, cost.cols);
  double pad = 0.0;
  for (double v : cost.values) pad = std::max(pad, std::abs(v));
  pad = pad * 2.0 + 1.0;

  const auto entry = [&](int r, int c) {
    return (r < cost.rows && c < cost.cols) ? cost.at(r, c) : pad;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // column -> row (1-based)
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = entry(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(static_cast<std::size_t>(cost.rows), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = match[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= cost.rows && j <= cost.cols) out[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return out;
}

// Instance-level bipartite assignment over the full scene, followed by
// point-level ordering for each matched pair. Cross-class pairs are gated by
// the sentinel cost.
inline MatchResult match_map(const GaussianMap& pred, const Scene& gt, const RasterGrid& grid,
                             double cutoff_sigmas = kDefaultCutoffSigmas) {
  const int p = static_cast<int>(pred.elements.size());
  const int g = static_cast<int>(gt.elements.size());

  std::vector<DensityMask> pred_masks(static_cast<std::size_t>(p));
  parallel_for(p, [&](int i) {
    pred_masks[static_cast<std::size_t>(i)] = render_element(pred.elements[static_cast<std::size_t>(i)], grid, cutoff_sigmas);
  });

  CostMatrix cost = CostMatrix::create(p, g);
  for (int i = 0; i < p; ++i) {
    const auto& e = pred.elements[static_cast<std::size_t>(i)];
    for (int j = 0; j < g; ++j) {
      const auto& t = gt.elements[static_cast<std::size_t>(j)];
      if (e.class_id != t.class_id) {
        cost.at(i, j) = kCrossClassCost;
        continue;
      }
      const int n = static_cast<int>(e.gaussians.size());
      const Polyline gt_pts = detail::gt_points_for(t, n);
      const double cls = focal_cls_cost(e.score, t.class_id);
      const double point = vector_loss(e, gt_pts, best_point_ordering(e, gt_pts)) / n;
      const double iou = soft_iou(pred_masks[static_cast<std::size_t>(i)], t.mask);
      cost.at(i, j) = cls + point + (1.0 - iou);
    }
  }

  MatchResult result;
  result.assignment = hungarian_assign(cost);
  for (int i = 0; i < p; ++i) {
    const int j = result.assignment[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    const auto& e = pred.elements[static_cast<std::size_t>(i)];
    const auto& t = gt.elements[static_cast<std::size_t>(j)];
    const Polyline gt_pts = detail::gt_points_for(t, static_cast<int>(e.gaussians.size()));
    result.pairs.push_back({i, j, best_point_ordering(e, gt_pts), cost.at(i, j)});
    result.total_cost += cost.at(i, j);
  }
  return result;
}

struct MapLossResult {
  double total = 0.0;
  // Indexed like pred.elements; unmatched predictions report their
  // background classification term in cls.
  std::vector<InstanceLossBreakdown> per_element;
  MatchResult match;
};

// Scene loss: matched pairs contribute the instance loss, unmatched
// predictions only their classification-to-background term. When grads is
// non-null it receives d total / d params per element (zeros for unmatched),
// with the assignment and point orderings frozen.
inline MapLossResult map_loss(const GaussianMap& pred, const Scene& gt, const RasterGrid& grid,
                              const LossWeights& w, const MatchResult& match,
                              std::vector<std::vector<ParamGrad>>* grads = nullptr,
                              double cutoff_sigmas = kDefaultCutoffSigmas) {
  validate(w);
  const int p = static_cast<int>(pred.elements.size());
  MapLossResult out;
  out.match = match;
  out.per_element.resize(static_cast<std::size_t>(p));
  if (grads) {
    grads->assign(static_cast<std::size_t>(p), {});
    for (int i = 0; i < p; ++i)
      (*grads)[static_cast<std::size_t>(i)].assign(pred.elements[static_cast<std::size_t>(i)].gaussians.size(),
                                                   ParamGrad{0, 0, 0, 0, 0});
  }

  std::vector<int> pair_of_pred(static_cast<std::size_t>(p), -1);
  for (std::size_t k = 0; k < match.pairs.size(); ++k)
    pair_of_pred[static_cast<std::size_t>(match.pairs[k].pred_index)] = static_cast<int>(k);

  parallel_for(p, [&](int i) {
    const auto& e = pred.elements[static_cast<std::size_t>(i)];
    const int k = pair_of_pred[static_cast<std::size_t>(i)];
    if (k < 0) {
      InstanceLossBreakdown b;
      b.cls = focal_background_loss(e.score);
      b.total = b.cls;
      out.per_element[static_cast<std::size_t>(i)] = b;
      return;
    }
    const auto& pair = match.pairs[static_cast<std::size_t>(k)];
    const auto& t = gt.elements[static_cast<std::size_t>(pair.gt_index)];
    if (grads) {
      out.per_element[static_cast<std::size_t>(i)] = instance_loss_with_grad(
          e, t, grid, w, pair.ordering, (*grads)[static_cast<std::size_t>(i)], cutoff_sigmas);
    } else {
      out.per_element[static_cast<std::size_t>(i)] = instance_loss(e, t, grid, w, cutoff_sigmas);
    }
  });

  for (const auto& b : out.per_element) out.total += b.total;
  return out;
}

inline MapLossResult map_loss(const GaussianMap& pred, const Scene& gt, const RasterGrid& grid,
                              const LossWeights& w, double cutoff_sigmas = kDefaultCutoffSigmas) {
  return map_loss(pred, gt, grid, w, match_map(pred, gt, grid, cutoff_sigmas), nullptr,
                  cutoff_sigmas);
}

}  // namespace gsmap
