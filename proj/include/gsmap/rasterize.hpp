#pragma once

#include <limits>
#include <vector>

#include "gsmap/gaussian.hpp"
#include "gsmap/grid.hpp"

namespace gsmap {

// Per-Gaussian contributions are culled outside the cutoff-sigma Mahalanobis
// ellipse. The per-pixel error of culling is bounded by N*exp(-cutoff^2/2).
inline constexpr double kDefaultCutoffSigmas = 3.5;
inline constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

namespace detail {

// Evaluation-ready form of one Gaussian on a grid: rotated-frame inverse
// scales plus the pixel bounding box of its cutoff ellipse.
struct PreparedGaussian {
  double mu_x, mu_y;
  double c, s;
  double inv_sx2, inv_sy2;
  double sigma_x, sigma_y;
  double maha_cut;  // squared Mahalanobis cutoff, +inf in exact mode
  int r0, r1, c0, c1;

  bool covers(double px, double py, double& maha_out) const {
    const double dx = px - mu_x;
    const double dy = py - mu_y;
    const double u1 = c * dx + s * dy;
    const double u2 = -s * dx + c * dy;
    maha_out = u1 * u1 * inv_sx2 + u2 * u2 * inv_sy2;
    return maha_out <= maha_cut;
  }
};

inline PreparedGaussian prepare(const Gaussian2D& g, const RasterGrid& grid, double cutoff_sigmas) {
  validate(g);
  PreparedGaussian p;
  p.mu_x = g.mu_x;
  p.mu_y = g.mu_y;
  p.c = std::cos(g.theta);
  p.s = std::sin(g.theta);
  p.inv_sx2 = 1.0 / (g.sigma_x * g.sigma_x);
  p.inv_sy2 = 1.0 / (g.sigma_y * g.sigma_y);
  p.sigma_x = g.sigma_x;
  p.sigma_y = g.sigma_y;
  if (std::isinf(cutoff_sigmas)) {
    p.maha_cut = std::numeric_limits<double>::infinity();
    p.r0 = 0;
    p.r1 = grid.height_px;
    p.c0 = 0;
    p.c1 = grid.width_px;
    return p;
  }
  p.maha_cut = cutoff_sigmas * cutoff_sigmas;
  // Axis-aligned half extents of the cutoff ellipse come straight from the
  // covariance diagonal.
  const double sx2 = g.sigma_x * g.sigma_x;
  const double sy2 = g.sigma_y * g.sigma_y;
  const double var_x = p.c * p.c * sx2 + p.s * p.s * sy2;
  const double var_y = p.s * p.s * sx2 + p.c * p.c * sy2;
  const double ex = cutoff_sigmas * std::sqrt(var_x);
  const double ey = cutoff_sigmas * std::sqrt(var_y);
  const double dx = grid.dx();
  const double dy = grid.dy();
  const int c0 = static_cast<int>(std::ceil((g.mu_x - ex - grid.x_min) / dx - 0.5));
  const int c1 = static_cast<int>(std::floor((g.mu_x + ex - grid.x_min) / dx - 0.5)) + 1;
  const int r0 = static_cast<int>(std::ceil((g.mu_y - ey - grid.y_min) / dy - 0.5));
  const int r1 = static_cast<int>(std::floor((g.mu_y + ey - grid.y_min) / dy - 0.5)) + 1;
  p.c0 = std::clamp(c0, 0, grid.width_px);
  p.c1 = std::clamp(c1, 0, grid.width_px);
  p.r0 = std::clamp(r0, 0, grid.height_px);
  p.r1 = std::clamp(r1, 0, grid.height_px);
  return p;
}

inline double prepared_density(double maha) {
  const double d = std::exp(-0.5 * maha);
  return d < kDensityFlush ? 0.0 : d;
}

}  // namespace detail

// Occupancy composite of one element: value(p) = 1 - prod_i (1 - G_i(p)).
// The transmittance product is accumulated in the element's Gaussian order so
// renders are bit-reproducible.
inline DensityMask render_element(const MapElement& e, const RasterGrid& grid,
                                  double cutoff_sigmas = kDefaultCutoffSigmas) {
  validate(grid);
  if (!(cutoff_sigmas > 0.0)) throw ConfigError("cutoff_sigmas must be positive or infinite");
  validate(e);

  DensityMask mask = DensityMask::zeros(grid);
  std::vector<double>& transmittance = mask.values;
  std::fill(transmittance.begin(), transmittance.end(), 1.0);

  for (const auto& g : e.gaussians) {
    const auto p = detail::prepare(g, grid, cutoff_sigmas);
    for (int r = p.r0; r < p.r1; ++r) {
      const double py = grid.y_min + (r + 0.5) * grid.dy();
      double* row = &transmittance[static_cast<std::size_t>(r) * grid.width_px];
      for (int c = p.c0; c < p.c1; ++c) {
        const double px = grid.x_min + (c + 0.5) * grid.dx();
        double maha;
        if (p.covers(px, py, maha)) row[c] *= 1.0 - detail::prepared_density(maha);
      }
    }
  }
  for (double& v : transmittance) v = 1.0 - v;
  return mask;
}

inline std::vector<DensityMask> render_map(const GaussianMap& m, const RasterGrid& grid,
                                           double cutoff_sigmas = kDefaultCutoffSigmas) {
  std::vector<DensityMask> out(m.elements.size());
  parallel_for(static_cast<int>(m.elements.size()),
               [&](int i) { out[i] = render_element(m.elements[i], grid, cutoff_sigmas); });
  return out;
}

// Backpropagates a per-pixel loss gradient through the composite to the 5N
// Gaussian parameters. Uses the same culling set as the forward pass, so the
// gradients are exact for the value render_element actually computed.
inline std::vector<ParamGrad> render_backward(const MapElement& e, const RasterGrid& grid,
                                              const std::vector<double>& upstream,
                                              double cutoff_sigmas = kDefaultCutoffSigmas) {
  validate(grid);
  validate(e);
  require_field_shape(grid, upstream);
  const int n = static_cast<int>(e.gaussians.size());

  std::vector<detail::PreparedGaussian> prepared(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) prepared[i] = detail::prepare(e.gaussians[i], grid, cutoff_sigmas);

  // Forward transmittance T(p) = prod (1 - G_k(p)) over the culled set.
  std::vector<double> transmittance(static_cast<std::size_t>(grid.size()), 1.0);
  for (const auto& p : prepared) {
    for (int r = p.r0; r < p.r1; ++r) {
      const double py = grid.y_min + (r + 0.5) * grid.dy();
      double* row = &transmittance[static_cast<std::size_t>(r) * grid.width_px];
      for (int c = p.c0; c < p.c1; ++c) {
        const double px = grid.x_min + (c + 0.5) * grid.dx();
        double maha;
        if (p.covers(px, py, maha)) row[c] *= 1.0 - detail::prepared_density(maha);
      }
    }
  }

  // Leave-one-out product via division, with a direct recomputation fallback
  // when the excluded factor is too close to zero.
  const auto product_excluding = [&](int skip, double px, double py) {
    double prod = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == skip) continue;
      double maha;
      if (prepared[j].covers(px, py, maha)) prod *= 1.0 - detail::prepared_density(maha);
    }
    return prod;
  };

  std::vector<ParamGrad> grads(static_cast<std::size_t>(n), ParamGrad{0, 0, 0, 0, 0});
  parallel_for(n, [&](int i) {
    const auto& p = prepared[i];
    ParamGrad acc{0, 0, 0, 0, 0};
    for (int r = p.r0; r < p.r1; ++r) {
      const double py = grid.y_min + (r + 0.5) * grid.dy();
      const double* trow = &transmittance[static_cast<std::size_t>(r) * grid.width_px];
      const double* urow = &upstream[static_cast<std::size_t>(r) * grid.width_px];
      for (int c = p.c0; c < p.c1; ++c) {
        const double px = grid.x_min + (c + 0.5) * grid.dx();
        double maha;
        if (!p.covers(px, py, maha)) continue;
        const double gi = detail::prepared_density(maha);
        if (gi == 0.0 || urow[c] == 0.0) continue;
        const double one_minus = 1.0 - gi;
        const double prod_others =
            one_minus > 1e-9 ? trow[c] / one_minus : product_excluding(i, px, py);
        const double w = urow[c] * prod_others;
        // d density / d params in the rotated frame, shared with
        // density_gradient.
        const double dx = px - p.mu_x;
        const double dy = py - p.mu_y;
        const double u1 = p.c * dx + p.s * dy;
        const double u2 = -p.s * dx + p.c * dy;
        const double w1 = u1 * p.inv_sx2;
        const double w2 = u2 * p.inv_sy2;
        acc[0] += w * gi * (p.c * w1 - p.s * w2);
        acc[1] += w * gi * (p.s * w1 + p.c * w2);
        acc[2] += w * gi * u1 * u1 * p.inv_sx2 / p.sigma_x;
        acc[3] += w * gi * u2 * u2 * p.inv_sy2 / p.sigma_y;
        acc[4] += w * gi * u1 * u2 * (p.inv_sy2 - p.inv_sx2);
      }
    }
    grads[static_cast<std::size_t>(i)] = acc;
  });
  return grads;
}

// Brute-force reference renderer: direct evaluation at every pixel with no
// culling, accumulated in log space for robustness. Exact-mode
// render_element must agree with this to 1e-12 absolute.
inline DensityMask render_oracle(const MapElement& e, const RasterGrid& grid) {
  validate(grid);
  validate(e);
  DensityMask mask = DensityMask::zeros(grid);
  for (int r = 0; r < grid.height_px; ++r) {
    for (int c = 0; c < grid.width_px; ++c) {
      const Vec2 p = grid.pixel_center(r, c);
      double log_t = 0.0;
      for (const auto& g : e.gaussians) log_t += std::log1p(-density(g, p));
      mask.at(r, c) = -std::expm1(log_t);
    }
  }
  return mask;
}

}  // namespace gsmap
