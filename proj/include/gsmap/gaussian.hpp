#pragma once

#include <array>
#include <string>
#include <vector>

#include "gsmap/common.hpp"

namespace gsmap {

enum class MapClass : int { ped_crossing = 0, divider = 1, boundary = 2 };

inline constexpr int kNumClasses = 3;

inline const char* to_string(MapClass c) {
  switch (c) {
    case MapClass::ped_crossing:
      return "ped_crossing";
    case MapClass::divider:
      return "divider";
    case MapClass::boundary:
      return "boundary";
  }
  return "unknown";
}

inline MapClass map_class_from_string(const std::string& s) {
  if (s == "ped_crossing") return MapClass::ped_crossing;
  if (s == "divider") return MapClass::divider;
  if (s == "boundary") return MapClass::boundary;
  throw ConfigError("unknown map class: " + s);
}

// One 2D Gaussian primitive: center in meters, principal-axis scales in
// meters, in-plane orientation in radians.
struct Gaussian2D {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double theta = 0.0;
};

// Densities below this are flushed to exactly zero to avoid subnormal
// slowdowns; gradients of flushed values are zero as well.
inline constexpr double kDensityFlush = 1e-30;

inline void validate(const Gaussian2D& g) {
  const bool finite = std::isfinite(g.mu_x) && std::isfinite(g.mu_y) && std::isfinite(g.sigma_x) &&
                      std::isfinite(g.sigma_y) && std::isfinite(g.theta);
  if (!finite || g.sigma_x <= 0.0 || g.sigma_y <= 0.0)
    throw InvalidPrimitiveError("Gaussian2D requires finite fields and positive scales");
}

// Sigma = R diag(sigma_x^2, sigma_y^2) R^T. Symmetric positive definite with
// eigenvalues {sigma_x^2, sigma_y^2} and det = sigma_x^2 * sigma_y^2.
inline Mat2 covariance(const Gaussian2D& g) {
  validate(g);
  const double c = std::cos(g.theta);
  const double s = std::sin(g.theta);
  const double sx2 = g.sigma_x * g.sigma_x;
  const double sy2 = g.sigma_y * g.sigma_y;
  const double off = c * s * (sx2 - sy2);
  return {c * c * sx2 + s * s * sy2, off, off, s * s * sx2 + c * c * sy2};
}

// Mahalanobis quadratic form evaluated in the rotated frame. The closed-form
// 2x2 inverse is exact here: u = R^T (p - mu), m = u1^2/sx^2 + u2^2/sy^2.
inline double mahalanobis_sq(const Gaussian2D& g, Vec2 p) {
  const double c = std::cos(g.theta);
  const double s = std::sin(g.theta);
  const double dx = p.x - g.mu_x;
  const double dy = p.y - g.mu_y;
  const double u1 = c * dx + s * dy;
  const double u2 = -s * dx + c * dy;
  return (u1 * u1) / (g.sigma_x * g.sigma_x) + (u2 * u2) / (g.sigma_y * g.sigma_y);
}

inline double density(const Gaussian2D& g, Vec2 p) {
  validate(g);
  if (!p.finite()) throw InvalidPrimitiveError("density: point must be finite");
  const double d = std::exp(-0.5 * mahalanobis_sq(g, p));
  return d < kDensityFlush ? 0.0 : d;
}

// Gradient order everywhere in this library: d/dmu_x, d/dmu_y, d/dsigma_x,
// d/dsigma_y, d/dtheta.
using ParamGrad = std::array<double, 5>;

inline ParamGrad density_gradient(const Gaussian2D& g, Vec2 p) {
  validate(g);
  const double c = std::cos(g.theta);
  const double s = std::sin(g.theta);
  const double dx = p.x - g.mu_x;
  const double dy = p.y - g.mu_y;
  const double u1 = c * dx + s * dy;
  const double u2 = -s * dx + c * dy;
  const double inv_sx2 = 1.0 / (g.sigma_x * g.sigma_x);
  const double inv_sy2 = 1.0 / (g.sigma_y * g.sigma_y);
  const double m = u1 * u1 * inv_sx2 + u2 * u2 * inv_sy2;
  const double d = std::exp(-0.5 * m);
  if (d < kDensityFlush) return {0.0, 0.0, 0.0, 0.0, 0.0};
  // Sigma^{-1} (p - mu) expressed through the rotated coordinates.
  const double w1 = u1 * inv_sx2;
  const double w2 = u2 * inv_sy2;
  return {
      d * (c * w1 - s * w2),
      d * (s * w1 + c * w2),
      d * u1 * u1 * inv_sx2 / g.sigma_x,
      d * u2 * u2 * inv_sy2 / g.sigma_y,
      d * u1 * u2 * (inv_sy2 - inv_sx2),
  };
}

// Wraps theta into [-pi/2, pi/2); the density is pi-periodic in theta so the
// result is pointwise identical.
inline double canonicalize_theta(double theta) {
  return theta - M_PI * std::floor(theta / M_PI + 0.5);
}

inline Gaussian2D canonicalize_theta(const Gaussian2D& g) {
  validate(g);
  Gaussian2D out = g;
  out.theta = canonicalize_theta(g.theta);
  return out;
}

inline constexpr int kDefaultGaussiansPerElement = 20;  // N
inline constexpr int kDefaultInstanceBudget = 50;       // M

// One map element: a fixed-length ordered Gaussian sequence plus class label,
// topology flag and per-class confidence vector.
struct MapElement {
  MapClass class_id = MapClass::divider;
  std::vector<Gaussian2D> gaussians;
  bool closed = false;
  std::array<double, kNumClasses> score{0.0, 0.0, 0.0};

  double confidence() const { return score[static_cast<int>(class_id)]; }
};

inline void validate(const MapElement& e, int expected_n = 0) {
  if (expected_n > 0 && static_cast<int>(e.gaussians.size()) != expected_n)
    throw ShapeError("MapElement: expected " + std::to_string(expected_n) + " gaussians, got " +
                     std::to_string(e.gaussians.size()));
  if (e.gaussians.empty()) throw ShapeError("MapElement: empty gaussian sequence");
  for (const auto& g : e.gaussians) validate(g);
  double sum = 0.0;
  for (double s : e.score) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("MapElement: scores must lie in [0,1]");
    sum += s;
  }
  if (sum > 1.0 + 1e-9) throw ConfigError("MapElement: scores must sum to at most 1");
}

struct GaussianMap {
  std::vector<MapElement> elements;
};

inline void validate(const GaussianMap& m, int instance_budget = kDefaultInstanceBudget,
                     int expected_n = 0) {
  if (static_cast<int>(m.elements.size()) > instance_budget)
    throw ConfigError("GaussianMap: element count exceeds instance budget");
  for (const auto& e : m.elements) validate(e, expected_n);
}

}  // namespace gsmap
