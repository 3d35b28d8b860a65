#pragma once

#include <atomic>
#include <optional>
#include <vector>

#include "gsmap/rasterize.hpp"
#include "gsmap/scene.hpp"

namespace gsmap {

struct LossWeights {
  double lambda_v = 1.0;
  double lambda_r = 10.0;
  // L1 vs D-SSIM mix inside the raster loss; 1 is pure weighted L1.
  double lambda_alpha = 0.8;
  // Foreground pixel weight; empty selects the per-mask background/foreground
  // ratio clamped to [1, 50].
  std::optional<double> w_pos;
};

inline void validate(const LossWeights& w) {
  if (!(w.lambda_v >= 0.0) || !(w.lambda_r >= 0.0))
    throw ConfigError("LossWeights: lambda_v and lambda_r must be >= 0");
  if (!(w.lambda_alpha >= 0.0 && w.lambda_alpha <= 1.0))
    throw ConfigError("LossWeights: lambda_alpha must lie in [0,1]");
  if (w.w_pos && !(*w.w_pos >= 1.0)) throw ConfigError("LossWeights: w_pos must be >= 1");
}

inline double effective_w_pos(const DensityMask& gt, const LossWeights& w) {
  if (w.w_pos) return *w.w_pos;
  long fg = 0;
  for (double v : gt.values) fg += v > 0.5 ? 1 : 0;
  if (fg == 0) return 1.0;
  const long bg = static_cast<long>(gt.values.size()) - fg;
  return std::clamp(static_cast<double>(bg) / static_cast<double>(fg), 1.0, 50.0);
}

namespace detail {

struct Rect {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  bool empty() const { return r0 >= r1 || c0 >= c1; }
  long area() const { return empty() ? 0 : static_cast<long>(r1 - r0) * (c1 - c0); }
};

// Bounding box of nonzero pixels in either mask. Pixels outside it are
// exactly zero in both, so loss terms there are known in closed form.
inline Rect nonzero_union_rect(const DensityMask& a, const DensityMask& b) {
  const int h = a.grid.height_px, w = a.grid.width_px;
  Rect r{h, 0, w, 0};
  for (int row = 0; row < h; ++row) {
    const double* ra = &a.values[static_cast<std::size_t>(row) * w];
    const double* rb = &b.values[static_cast<std::size_t>(row) * w];
    for (int col = 0; col < w; ++col) {
      if (ra[col] != 0.0 || rb[col] != 0.0) {
        r.r0 = std::min(r.r0, row);
        r.r1 = std::max(r.r1, row + 1);
        r.c0 = std::min(r.c0, col);
        r.c1 = std::max(r.c1, col + 1);
      }
    }
  }
  if (r.r0 >= r.r1) return Rect{};
  return r;
}

inline Rect expand(Rect r, int pad, int h, int w) {
  if (r.empty()) return r;
  return {std::max(0, r.r0 - pad), std::min(h, r.r1 + pad), std::max(0, r.c0 - pad),
          std::min(w, r.c1 + pad)};
}

inline constexpr int kSsimRadius = 5;  // 11x11 window
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

inline const std::array<double, 11>& ssim_window() {
  static const std::array<double, 11> win = [] {
    std::array<double, 11> w{};
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - kSsimRadius;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return win;
}

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// Row range the horizontal pass must cover so the vertical pass can gather
// (or scatter) with reflect indexing. Falls back to the full height on grids
// smaller than the window.
inline std::pair<int, int> padded_rows(Rect rect, int h) {
  if (h <= 2 * kSsimRadius + 1) return {0, h};
  return {std::max(0, rect.r0 - kSsimRadius), std::min(h, rect.r1 + kSsimRadius)};
}

// Separable 11x11 Gaussian blur of src, written to dst over rect only.
// src must be a full-size buffer; values outside rect are read as-is.
inline void ssim_blur(const std::vector<double>& src, std::vector<double>& tmp,
                      std::vector<double>& dst, Rect rect, int h, int w) {
  const auto& win = ssim_window();
  const auto [rlo, rhi] = padded_rows(rect, h);
  for (int r = rlo; r < rhi; ++r) {
    const double* srow = &src[static_cast<std::size_t>(r) * w];
    double* trow = &tmp[static_cast<std::size_t>(r) * w];
    for (int c = rect.c0; c < rect.c1; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k)
        acc += win[static_cast<std::size_t>(k)] * srow[reflect101(c + k - kSsimRadius, w)];
      trow[c] = acc;
    }
  }
  for (int r = rect.r0; r < rect.r1; ++r) {
    double* drow = &dst[static_cast<std::size_t>(r) * w];
    for (int c = rect.c0; c < rect.c1; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k)
        acc += win[static_cast<std::size_t>(k)] *
               tmp[static_cast<std::size_t>(reflect101(r + k - kSsimRadius, h)) * w + c];
      drow[c] = acc;
    }
  }
}

// Exact adjoint of ssim_blur: scatters g (defined over rect) into dst, which
// must be full-size and zeroed by the caller.
inline void ssim_blur_adjoint(const std::vector<double>& g, std::vector<double>& tmp,
                              std::vector<double>& dst, Rect rect, int h, int w) {
  const auto& win = ssim_window();
  const auto [rlo, rhi] = padded_rows(rect, h);
  for (int r = rlo; r < rhi; ++r)
    std::fill(&tmp[static_cast<std::size_t>(r) * w + rect.c0],
              &tmp[static_cast<std::size_t>(r) * w + rect.c1], 0.0);
  for (int r = rect.r0; r < rect.r1; ++r) {
    const double* grow = &g[static_cast<std::size_t>(r) * w];
    for (int k = 0; k < 11; ++k) {
      double* trow = &tmp[static_cast<std::size_t>(reflect101(r + k - kSsimRadius, h)) * w];
      const double wk = win[static_cast<std::size_t>(k)];
      for (int c = rect.c0; c < rect.c1; ++c) trow[c] += wk * grow[c];
    }
  }
  for (int r = rlo; r < rhi; ++r) {
    const double* trow = &tmp[static_cast<std::size_t>(r) * w];
    double* drow = &dst[static_cast<std::size_t>(r) * w];
    for (int c = rect.c0; c < rect.c1; ++c) {
      const double v = trow[c];
      if (v == 0.0) continue;
      for (int k = 0; k < 11; ++k) drow[reflect101(c + k - kSsimRadius, w)] += win[static_cast<std::size_t>(k)] * v;
    }
  }
}

// Shared forward(+backward) for d_ssim. Pixels whose 11x11 windows are
// all-zero in both images have SSIM exactly 1 and zero gradient, so the
// computation is restricted to the nonzero region padded by two window radii
// without any approximation.
inline double d_ssim_impl(const DensityMask& pred, const DensityMask& gt,
                          std::vector<double>* grad_out) {
  require_same_grid(pred, gt);
  const int h = pred.grid.height_px, w = pred.grid.width_px;
  const std::size_t total = pred.values.size();
  if (grad_out) grad_out->assign(total, 0.0);

  const Rect rect = expand(nonzero_union_rect(pred, gt), 2 * kSsimRadius, h, w);
  if (rect.empty()) return 0.0;

  const std::vector<double>& x = pred.values;
  const std::vector<double>& y = gt.values;
  std::vector<double> xx(total), yy(total), xy(total);
  for (std::size_t i = 0; i < total; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }

  std::vector<double> tmp(total), mu_x(total), mu_y(total), m_xx(total), m_yy(total), m_xy(total);
  ssim_blur(x, tmp, mu_x, rect, h, w);
  ssim_blur(y, tmp, mu_y, rect, h, w);
  ssim_blur(xx, tmp, m_xx, rect, h, w);
  ssim_blur(yy, tmp, m_yy, rect, h, w);
  ssim_blur(xy, tmp, m_xy, rect, h, w);

  std::vector<double> g_ux, g_uxx, g_uxy;
  if (grad_out) {
    g_ux.assign(total, 0.0);
    g_uxx.assign(total, 0.0);
    g_uxy.assign(total, 0.0);
  }

  const double n_pixels = static_cast<double>(total);
  double sum_s = 0.0;
  const double dl_ds = -0.5 / n_pixels;  // d[(1 - mean S)/2] / dS(p)
  for (int r = rect.r0; r < rect.r1; ++r) {
    for (int c = rect.c0; c < rect.c1; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double mx = mu_x[i], my = mu_y[i];
      const double var_x = m_xx[i] - mx * mx;
      const double var_y = m_yy[i] - my * my;
      const double cov = m_xy[i] - mx * my;
      const double a1 = 2.0 * mx * my + kSsimC1;
      const double a2 = 2.0 * cov + kSsimC2;
      const double b1 = mx * mx + my * my + kSsimC1;
      const double b2 = var_x + var_y + kSsimC2;
      const double s = (a1 * a2) / (b1 * b2);
      sum_s += s;
      if (!grad_out) continue;
      const double inv_b1b2 = 1.0 / (b1 * b2);
      const double g_a1 = dl_ds * a2 * inv_b1b2;
      const double g_a2 = dl_ds * a1 * inv_b1b2;
      const double g_b1 = -dl_ds * s / b1;
      const double g_b2 = -dl_ds * s / b2;
      const double g_mux = 2.0 * my * g_a1 + 2.0 * mx * g_b1;
      const double g_varx = g_b2;
      const double g_cov = 2.0 * g_a2;
      g_ux[i] = g_mux - 2.0 * mx * g_varx - my * g_cov;
      g_uxx[i] = g_varx;
      g_uxy[i] = g_cov;
    }
  }
  sum_s += static_cast<double>(total - static_cast<std::size_t>(rect.area()));

  if (grad_out) {
    std::vector<double> a_ux(total, 0.0), a_uxx(total, 0.0), a_uxy(total, 0.0);
    ssim_blur_adjoint(g_ux, tmp, a_ux, rect, h, w);
    ssim_blur_adjoint(g_uxx, tmp, a_uxx, rect, h, w);
    ssim_blur_adjoint(g_uxy, tmp, a_uxy, rect, h, w);
    std::vector<double>& grad = *grad_out;
    for (std::size_t i = 0; i < total; ++i) grad[i] = a_ux[i] + 2.0 * x[i] * a_uxx[i] + y[i] * a_uxy[i];
  }
  return 0.5 * (1.0 - sum_s / n_pixels);
}

inline std::atomic<long>& soft_iou_degenerate_counter() {
  static std::atomic<long> count{0};
  return count;
}

}  // namespace detail

// Mean of w(p)|pred - gt| with w = w_pos on GT-foreground pixels and 1
// elsewhere, normalized by the total weight.
inline double weighted_l1(const DensityMask& pred, const DensityMask& gt, double w_pos) {
  require_same_grid(pred, gt);
  if (!(w_pos >= 1.0)) throw ConfigError("weighted_l1: w_pos must be >= 1");
  const detail::Rect rect = detail::nonzero_union_rect(pred, gt);
  const int w = pred.grid.width_px;
  double num = 0.0;
  double den = static_cast<double>(pred.values.size()) - static_cast<double>(rect.area());
  for (int r = rect.r0; r < rect.r1; ++r) {
    for (int c = rect.c0; c < rect.c1; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double weight = gt.values[i] > 0.5 ? w_pos : 1.0;
      num += weight * std::abs(pred.values[i] - gt.values[i]);
      den += weight;
    }
  }
  return num / den;
}

// (1 - SSIM)/2 with the standard 11x11 Gaussian window (sigma 1.5),
// C1=0.01^2, C2=0.03^2 on unit dynamic range, reflect-padded borders.
inline double d_ssim(const DensityMask& pred, const DensityMask& gt) {
  return detail::d_ssim_impl(pred, gt, nullptr);
}

inline double raster_loss(const DensityMask& pred, const DensityMask& gt, const LossWeights& w) {
  validate(w);
  const double wl1 = weighted_l1(pred, gt, effective_w_pos(gt, w));
  const double ds = d_ssim(pred, gt);
  return w.lambda_alpha * wl1 + (1.0 - w.lambda_alpha) * ds;
}

inline constexpr double kFocalAlpha = 0.25;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalProbFloor = 1e-12;

namespace detail {

inline double focal_pos_term(double p) {
  p = std::clamp(p, kFocalProbFloor, 1.0);
  return kFocalAlpha * std::pow(1.0 - p, kFocalGamma) * (-std::log(p));
}

inline double focal_neg_term(double p) {
  p = std::clamp(p, 0.0, 1.0 - kFocalProbFloor);
  return (1.0 - kFocalAlpha) * std::pow(p, kFocalGamma) * (-std::log(1.0 - p));
}

}  // namespace detail

// Classification cost of assigning this prediction to a target class:
// the focal term at the target-class probability. Monotonically decreasing
// in p, zero for a fully confident correct score.
inline double focal_cls_cost(const std::array<double, kNumClasses>& scores, MapClass target) {
  return detail::focal_pos_term(scores[static_cast<std::size_t>(static_cast<int>(target))]);
}

// Full focal classification loss for a matched pair: positive term at the
// target class plus negative terms for the remaining classes.
inline double focal_loss(const std::array<double, kNumClasses>& scores, MapClass target) {
  double loss = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double p = scores[static_cast<std::size_t>(c)];
    loss += c == static_cast<int>(target) ? detail::focal_pos_term(p) : detail::focal_neg_term(p);
  }
  return loss;
}

// Focal loss of an unmatched prediction against the all-background target.
inline double focal_background_loss(const std::array<double, kNumClasses>& scores) {
  double loss = 0.0;
  for (double p : scores) loss += detail::focal_neg_term(p);
  return loss;
}

// sum min / sum max of two [0,1] masks. Two empty masks define IoU 1; the
// degenerate case is counted so callers can audit it.
inline double soft_iou(const DensityMask& a, const DensityMask& b) {
  require_same_grid(a, b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    num += std::min(a.values[i], b.values[i]);
    den += std::max(a.values[i], b.values[i]);
  }
  if (den == 0.0) {
    detail::soft_iou_degenerate_counter().fetch_add(1, std::memory_order_relaxed);
    return 1.0;
  }
  return num / den;
}

inline long soft_iou_degenerate_count() {
  return detail::soft_iou_degenerate_counter().load(std::memory_order_relaxed);
}

struct InstanceLossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double vector = 0.0;
  double raster = 0.0;
};

namespace detail {

inline Polyline gt_points_for(const GroundTruthElement& gt, int n) {
  if (static_cast<int>(gt.resampled.points.size()) == n) return gt.resampled;
  return resample_uniform(gt.vertices, n);
}

}  // namespace detail

// L_ins = L_cls + lambda_v L_vector + lambda_r L_raster for one matched pair.
// Components are reported unweighted.
inline InstanceLossBreakdown instance_loss(const MapElement& pred, const GroundTruthElement& gt,
                                           const RasterGrid& grid, const LossWeights& w,
                                           double cutoff_sigmas = kDefaultCutoffSigmas) {
  validate(w);
  if (!(gt.mask.grid == grid)) throw ShapeError("instance_loss: GT mask grid mismatch");
  const Polyline gt_pts = detail::gt_points_for(gt, static_cast<int>(pred.gaussians.size()));

  InstanceLossBreakdown out;
  out.cls = focal_loss(pred.score, gt.class_id);
  out.vector = vector_loss(pred, gt_pts, best_point_ordering(pred, gt_pts));
  out.raster = raster_loss(render_element(pred, grid, cutoff_sigmas), gt.mask, w);
  out.total = out.cls + w.lambda_v * out.vector + w.lambda_r * out.raster;
  return out;
}

// Same value plus d total / d (mu, sigma, theta) for every Gaussian of the
// prediction. The point ordering is frozen (pass the matched one); the
// Manhattan subgradient at a kink is 0.
inline InstanceLossBreakdown instance_loss_with_grad(const MapElement& pred,
                                                     const GroundTruthElement& gt,
                                                     const RasterGrid& grid, const LossWeights& w,
                                                     const PointOrdering& ordering,
                                                     std::vector<ParamGrad>& grads,
                                                     double cutoff_sigmas = kDefaultCutoffSigmas) {
  validate(w);
  if (!(gt.mask.grid == grid)) throw ShapeError("instance_loss: GT mask grid mismatch");
  const int n = static_cast<int>(pred.gaussians.size());
  const Polyline gt_pts = detail::gt_points_for(gt, n);

  InstanceLossBreakdown out;
  out.cls = focal_loss(pred.score, gt.class_id);
  out.vector = vector_loss(pred, gt_pts, ordering);

  const DensityMask pred_mask = render_element(pred, grid, cutoff_sigmas);
  const double w_pos = effective_w_pos(gt.mask, w);

  // Weighted-L1 pixel gradient on the nonzero region.
  std::vector<double> upstream(pred_mask.values.size(), 0.0);
  {
    const detail::Rect rect = detail::nonzero_union_rect(pred_mask, gt.mask);
    const int wpx = grid.width_px;
    double den = static_cast<double>(pred_mask.values.size()) - static_cast<double>(rect.area());
    double num = 0.0;
    for (int r = rect.r0; r < rect.r1; ++r) {
      for (int c = rect.c0; c < rect.c1; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * wpx + c;
        const double weight = gt.mask.values[i] > 0.5 ? w_pos : 1.0;
        num += weight * std::abs(pred_mask.values[i] - gt.mask.values[i]);
        den += weight;
      }
    }
    const double wl1 = num / den;
    std::vector<double> ssim_grad;
    const double ds = detail::d_ssim_impl(pred_mask, gt.mask, &ssim_grad);
    out.raster = w.lambda_alpha * wl1 + (1.0 - w.lambda_alpha) * ds;

    const double scale_l1 = w.lambda_r * w.lambda_alpha / den;
    const double scale_ssim = w.lambda_r * (1.0 - w.lambda_alpha);
    for (int r = rect.r0; r < rect.r1; ++r) {
      for (int c = rect.c0; c < rect.c1; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * wpx + c;
        const double diff = pred_mask.values[i] - gt.mask.values[i];
        const double weight = gt.mask.values[i] > 0.5 ? w_pos : 1.0;
        const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        upstream[i] = scale_l1 * weight * sgn;
      }
    }
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += scale_ssim * ssim_grad[i];
  }

  grads = render_backward(pred, grid, upstream, cutoff_sigmas);
  for (int i = 0; i < n; ++i) {
    const auto& g = pred.gaussians[static_cast<std::size_t>(i)];
    const Vec2 t = gt_pts.points[static_cast<std::size_t>(ordering.map(i, n))];
    const double dx = g.mu_x - t.x;
    const double dy = g.mu_y - t.y;
    grads[static_cast<std::size_t>(i)][0] += w.lambda_v * (dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0));
    grads[static_cast<std::size_t>(i)][1] += w.lambda_v * (dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0));
  }

  out.total = out.cls + w.lambda_v * out.vector + w.lambda_r * out.raster;
  return out;
}

}  // namespace gsmap
