#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace gsmap;
using namespace gsmap::testing;

TEST(Covariance, IsotropicRotationCancels) {
  const Mat2 cov = covariance({0.0, 0.0, 1.0, 1.0, 0.7});
  EXPECT_NEAR(cov.m00, 1.0, 1e-12);
  EXPECT_NEAR(cov.m01, 0.0, 1e-12);
  EXPECT_NEAR(cov.m10, 0.0, 1e-12);
  EXPECT_NEAR(cov.m11, 1.0, 1e-12);
}

TEST(Covariance, AxisAligned) {
  const Mat2 cov = covariance({0.0, 0.0, 2.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(cov.m00, 4.0);
  EXPECT_DOUBLE_EQ(cov.m01, 0.0);
  EXPECT_DOUBLE_EQ(cov.m11, 1.0);
}

TEST(Covariance, QuarterTurnSwapsAxes) {
  const Mat2 cov = covariance({0.0, 0.0, 2.0, 1.0, M_PI / 2.0});
  EXPECT_NEAR(cov.m00, 1.0, 1e-12);
  EXPECT_NEAR(cov.m01, 0.0, 1e-12);
  EXPECT_NEAR(cov.m11, 4.0, 1e-12);
}

TEST(Covariance, InvalidPrimitiveRejected) {
  EXPECT_THROW(covariance({0, 0, 0.0, 1.0, 0}), InvalidPrimitiveError);
  EXPECT_THROW(covariance({0, 0, -1.0, 1.0, 0}), InvalidPrimitiveError);
  EXPECT_THROW(covariance({std::nan(""), 0, 1.0, 1.0, 0}), InvalidPrimitiveError);
  EXPECT_THROW(density({0, 0, 1.0, std::numeric_limits<double>::infinity(), 0}, {0, 0}),
               InvalidPrimitiveError);
}

TEST(Covariance, EigenvaluesAreSquaredScales) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Gaussian2D g = random_gaussian(rng);
    const auto [lo, hi] = sym_eigenvalues(covariance(g));
    const double want_lo = std::min(g.sigma_x * g.sigma_x, g.sigma_y * g.sigma_y);
    const double want_hi = std::max(g.sigma_x * g.sigma_x, g.sigma_y * g.sigma_y);
    EXPECT_LT(relative_error(lo, want_lo), 1e-12);
    EXPECT_LT(relative_error(hi, want_hi), 1e-12);
    EXPECT_LT(relative_error(covariance(g).det(), want_lo * want_hi), 1e-12);
  }
}

TEST(Density, UnitAtCenter) {
  EXPECT_DOUBLE_EQ(density({0, 0, 1, 1, 0}, {0, 0}), 1.0);
}

TEST(Density, UnitMahalanobisDistance) {
  EXPECT_NEAR(density({0, 0, 1, 1, 0}, {1, 0}), std::exp(-0.5), 1e-15);
}

TEST(Density, RotatedPrincipalAxis) {
  EXPECT_NEAR(density({0, 0, 2, 1, M_PI / 2.0}, {0, 2}), std::exp(-0.5), 1e-12);
}

TEST(Density, RangeAndMaximum) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const Gaussian2D g = random_gaussian(rng);
    const Vec2 p{rng.uniform(-8, 8), rng.uniform(-8, 8)};
    const double d = density(g, p);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    if (p.x != g.mu_x || p.y != g.mu_y) {
      EXPECT_LT(d, 1.0);
    }
    EXPECT_DOUBLE_EQ(density(g, {g.mu_x, g.mu_y}), 1.0);
  }
}

TEST(Density, PiPeriodicInTheta) {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    Gaussian2D g = random_gaussian(rng);
    const Vec2 p{rng.uniform(-8, 8), rng.uniform(-8, 8)};
    Gaussian2D shifted = g;
    shifted.theta = g.theta + M_PI;
    EXPECT_NEAR(density(g, p), density(shifted, p), 1e-15);
  }
}

TEST(Density, IsotropicDependsOnRadiusOnly) {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian2D g = random_gaussian(rng);
    g.sigma_y = g.sigma_x;
    const double radius = rng.uniform(0.1, 4.0);
    const double phi1 = rng.uniform(0, 2 * M_PI);
    const double phi2 = rng.uniform(0, 2 * M_PI);
    const Vec2 p1{g.mu_x + radius * std::cos(phi1), g.mu_y + radius * std::sin(phi1)};
    const Vec2 p2{g.mu_x + radius * std::cos(phi2), g.mu_y + radius * std::sin(phi2)};
    EXPECT_NEAR(density(g, p1), density(g, p2), 1e-12);
  }
}

TEST(Density, StrictlyDecreasingAlongRays) {
  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const Gaussian2D g = random_gaussian(rng);
    const double phi = rng.uniform(0, 2 * M_PI);
    const Vec2 dir{std::cos(phi), std::sin(phi)};
    double prev = density(g, {g.mu_x, g.mu_y});
    for (int step = 1; step <= 8 && prev > 0.0; ++step) {
      const double d = density(g, {g.mu_x + dir.x * 0.4 * step, g.mu_y + dir.y * 0.4 * step});
      EXPECT_LT(d, prev);
      prev = d;
    }
  }
}

TEST(DensityGradient, ZeroAtCenter) {
  const ParamGrad grad = density_gradient({1.0, -2.0, 0.8, 0.3, 0.4}, {1.0, -2.0});
  EXPECT_DOUBLE_EQ(grad[0], 0.0);
  EXPECT_DOUBLE_EQ(grad[1], 0.0);
}

TEST(DensityGradient, IsotropicThetaInsensitive) {
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian2D g = random_gaussian(rng);
    g.sigma_y = g.sigma_x;
    const Vec2 p{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    EXPECT_DOUBLE_EQ(density_gradient(g, p)[4], 0.0);
  }
}

TEST(DensityGradient, KnownCenterDerivative) {
  const Gaussian2D g{0, 0, 1, 1, 0};
  const ParamGrad grad = density_gradient(g, {1, 0});
  EXPECT_NEAR(grad[0], std::exp(-0.5), 1e-12);
  const double fd = central_difference([&](const Gaussian2D& gg) { return density(gg, {1, 0}); },
                                       g, 0, 1e-6);
  EXPECT_LT(relative_error(grad[0], fd), 1e-5);
}

TEST(DensityGradient, MatchesFiniteDifferences) {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const Gaussian2D g = random_gaussian(rng);
    const Vec2 p{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    if (density(g, p) < 1e-12) continue;
    const ParamGrad grad = density_gradient(g, p);
    for (int k = 0; k < 5; ++k) {
      const double fd =
          central_difference([&](const Gaussian2D& gg) { return density(gg, p); }, g, k, 1e-6);
      if (std::abs(grad[static_cast<std::size_t>(k)]) < 1e-9 && std::abs(fd) < 1e-9) continue;
      EXPECT_LT(relative_error(grad[static_cast<std::size_t>(k)], fd), 1e-5)
          << "param " << k << " analytic " << grad[static_cast<std::size_t>(k)] << " fd " << fd;
    }
    ++checked;
  }
  EXPECT_GE(checked, 1000);
}

TEST(CanonicalizeTheta, WrapsPeriod) {
  EXPECT_NEAR(canonicalize_theta(Gaussian2D{0, 0, 1, 2, M_PI}).theta, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(canonicalize_theta(Gaussian2D{0, 0, 1, 2, 0.3}).theta, 0.3);
  EXPECT_NEAR(canonicalize_theta(Gaussian2D{0, 0, 1, 2, 3 * M_PI / 4}).theta, -M_PI / 4, 1e-12);
}

TEST(CanonicalizeTheta, RangeAndDensityPreserved) {
  Rng rng(18);
  for (int trial = 0; trial < 300; ++trial) {
    Gaussian2D g = random_gaussian(rng);
    g.theta = rng.uniform(-20, 20);
    const Gaussian2D canon = canonicalize_theta(g);
    EXPECT_GE(canon.theta, -M_PI / 2);
    EXPECT_LT(canon.theta, M_PI / 2);
    for (int k = 0; k < 100; ++k) {
      const Vec2 p{rng.uniform(-6, 6), rng.uniform(-6, 6)};
      EXPECT_NEAR(density(g, p), density(canon, p), 1e-12);
    }
  }
}

TEST(MapElement, ValidationContracts) {
  MapElement e;
  e.gaussians.assign(5, Gaussian2D{});
  e.score = {0.2, 0.5, 0.3};
  EXPECT_NO_THROW(validate(e));
  EXPECT_THROW(validate(e, 20), ShapeError);

  e.score = {0.9, 0.5, 0.3};
  EXPECT_THROW(validate(e), ConfigError);

  e.score = {0.0, 1.0, 0.0};
  e.gaussians[2].sigma_x = -1.0;
  EXPECT_THROW(validate(e), InvalidPrimitiveError);

  GaussianMap map;
  map.elements.assign(kDefaultInstanceBudget + 1, [] {
    MapElement el;
    el.gaussians.assign(2, Gaussian2D{});
    return el;
  }());
  EXPECT_THROW(validate(map), ConfigError);
}
