#include <gtest/gtest.h>

#include <chrono>

#include "test_support.hpp"

using namespace gsmap;
using namespace gsmap::testing;

namespace {

RasterGrid small_grid() { return {48, 32, -6.0, 6.0, -4.0, 4.0}; }

MapElement single_gaussian_element(const Gaussian2D& g) {
  MapElement e;
  e.gaussians = {g};
  e.score = {0.0, 1.0, 0.0};
  return e;
}

}  // namespace

TEST(RenderElement, SingleGaussianEqualsDensity) {
  const RasterGrid grid = small_grid();
  const Gaussian2D g{0.5, -0.3, 1.2, 0.4, 0.6};
  const DensityMask mask = render_element(single_gaussian_element(g), grid, kNoCutoff);
  for (int r = 0; r < grid.height_px; ++r)
    for (int c = 0; c < grid.width_px; ++c)
      EXPECT_NEAR(mask.at(r, c), density(g, grid.pixel_center(r, c)), 1e-15);
}

TEST(RenderElement, CoincidentGaussiansCompose) {
  const RasterGrid grid = small_grid();
  const Gaussian2D g{0.0, 0.0, 1.0, 1.0, 0.0};
  MapElement e;
  e.gaussians = {g, g};
  const DensityMask mask = render_element(e, grid, kNoCutoff);
  for (int r = 0; r < grid.height_px; ++r) {
    for (int c = 0; c < grid.width_px; ++c) {
      const double d = density(g, grid.pixel_center(r, c));
      EXPECT_NEAR(mask.at(r, c), 1.0 - (1.0 - d) * (1.0 - d), 1e-14);
    }
  }
  // At the half-density point the pair composes to exactly 0.75.
  const RasterGrid one{1, 1, std::sqrt(2.0 * std::log(2.0)) - 0.5,
                       std::sqrt(2.0 * std::log(2.0)) + 0.5, -0.5, 0.5};
  const DensityMask at_half = render_element(e, one, kNoCutoff);
  EXPECT_NEAR(at_half.at(0, 0), 0.75, 1e-12);
}

TEST(RenderElement, ExactModeMatchesOracle) {
  Rng rng(21);
  const RasterGrid grid;  // default 200x100 grid
  for (int trial = 0; trial < 10; ++trial) {
    const MapElement e = random_element(rng, 20, grid);
    const DensityMask fast = render_element(e, grid, kNoCutoff);
    const DensityMask oracle = render_oracle(e, grid);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < fast.values.size(); ++i)
      max_diff = std::max(max_diff, std::abs(fast.values[i] - oracle.values[i]));
    EXPECT_LT(max_diff, 1e-12);
  }
}

TEST(RenderElement, CutoffErrorBounded) {
  Rng rng(22);
  const RasterGrid grid;
  for (double cutoff : {2.5, 3.5, 4.5}) {
    const double bound = 20.0 * std::exp(-cutoff * cutoff / 2.0);
    for (int trial = 0; trial < 5; ++trial) {
      const MapElement e = random_element(rng, 20, grid);
      const DensityMask exact = render_element(e, grid, kNoCutoff);
      const DensityMask culled = render_element(e, grid, cutoff);
      for (std::size_t i = 0; i < exact.values.size(); ++i)
        EXPECT_LE(std::abs(exact.values[i] - culled.values[i]), bound);
    }
  }
}

TEST(RenderElement, ValuesInUnitRange) {
  Rng rng(23);
  const RasterGrid grid = small_grid();
  for (int trial = 0; trial < 20; ++trial) {
    const MapElement e = random_element(rng, 8, grid);
    for (double v : render_element(e, grid).values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(RenderElement, MonotoneInGaussianCount) {
  Rng rng(24);
  const RasterGrid grid = small_grid();
  for (int trial = 0; trial < 10; ++trial) {
    MapElement e = random_element(rng, 6, grid);
    const DensityMask before = render_element(e, grid, kNoCutoff);
    e.gaussians.push_back(random_gaussian(rng, 3.0));
    const DensityMask after = render_element(e, grid, kNoCutoff);
    for (std::size_t i = 0; i < before.values.size(); ++i)
      EXPECT_GE(after.values[i], before.values[i]);
  }
}

TEST(RenderElement, PermutationInvariant) {
  Rng rng(25);
  const RasterGrid grid = small_grid();
  for (int trial = 0; trial < 10; ++trial) {
    MapElement e = random_element(rng, 7, grid);
    MapElement shuffled = e;
    for (int i = static_cast<int>(shuffled.gaussians.size()) - 1; i > 0; --i)
      std::swap(shuffled.gaussians[static_cast<std::size_t>(i)],
                shuffled.gaussians[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    const DensityMask a = render_element(e, grid, kNoCutoff);
    const DensityMask b = render_element(shuffled, grid, kNoCutoff);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
  }
}

TEST(RenderElement, InvalidGridRejected) {
  MapElement e = single_gaussian_element({0, 0, 1, 1, 0});
  EXPECT_THROW(render_element(e, {0, 10, -1, 1, -1, 1}), ConfigError);
  EXPECT_THROW(render_element(e, {10, 10, 1, -1, -1, 1}), ConfigError);
  EXPECT_THROW(render_element(e, small_grid(), -1.0), ConfigError);
}

TEST(RenderMap, EmptyMapRendersNothing) {
  EXPECT_TRUE(render_map(GaussianMap{}, small_grid()).empty());
}

TEST(RenderMap, ElementsIndependent) {
  Rng rng(26);
  const RasterGrid grid = small_grid();
  GaussianMap map;
  map.elements.push_back(random_element(rng, 5, grid));
  map.elements.push_back(random_element(rng, 5, grid));
  const auto masks = render_map(map, grid);
  for (std::size_t i = 0; i < map.elements.size(); ++i) {
    const DensityMask alone = render_element(map.elements[i], grid);
    EXPECT_EQ(masks[i].values, alone.values);
  }
}

TEST(RenderMap, FiftyElementBudget) {
  Rng rng(27);
  const RasterGrid grid;  // 200x100
  GaussianMap map;
  for (int i = 0; i < 50; ++i) map.elements.push_back(random_element(rng, 20, grid));
  const auto t0 = std::chrono::steady_clock::now();
  const auto masks = render_map(map, grid, 3.5);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(masks.size(), 50u);
  EXPECT_LT(ms, 100.0);
}

TEST(RenderBackward, ZeroUpstreamZeroGradient) {
  Rng rng(28);
  const RasterGrid grid = small_grid();
  const MapElement e = random_element(rng, 6, grid);
  const std::vector<double> upstream(static_cast<std::size_t>(grid.size()), 0.0);
  for (const auto& grad : render_backward(e, grid, upstream))
    for (double v : grad) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(RenderBackward, SinglePixelSingleGaussianMatchesDensityGradient) {
  const RasterGrid grid = small_grid();
  const Gaussian2D g{0.4, 0.2, 0.9, 0.5, 0.3};
  const MapElement e = single_gaussian_element(g);
  std::vector<double> upstream(static_cast<std::size_t>(grid.size()), 0.0);
  const int row = 18, col = 30;
  upstream[static_cast<std::size_t>(row) * grid.width_px + col] = 1.0;
  const auto grads = render_backward(e, grid, upstream, kNoCutoff);
  const ParamGrad want = density_gradient(g, grid.pixel_center(row, col));
  for (int k = 0; k < 5; ++k)
    EXPECT_NEAR(grads[0][static_cast<std::size_t>(k)], want[static_cast<std::size_t>(k)], 1e-12);
}

TEST(RenderBackward, MatchesFiniteDifferences) {
  Rng rng(29);
  const RasterGrid grid{24, 16, -6.0, 6.0, -4.0, 4.0};
  for (int trial = 0; trial < 8; ++trial) {
    const int n = trial < 4 ? 5 : 20;
    const MapElement e = random_element(rng, n, grid);
    std::vector<double> upstream(static_cast<std::size_t>(grid.size()));
    for (double& u : upstream) u = rng.uniform(-1.0, 1.0);
    const auto loss = [&](const MapElement& elem) {
      const DensityMask mask = render_element(elem, grid, kNoCutoff);
      double acc = 0.0;
      for (std::size_t i = 0; i < mask.values.size(); ++i) acc += upstream[i] * mask.values[i];
      return acc;
    };
    const auto analytic = render_backward(e, grid, upstream, kNoCutoff);
    const auto fd = element_central_difference(loss, e, 1e-5);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      for (int k = 0; k < 5; ++k) {
        const double a = analytic[i][static_cast<std::size_t>(k)];
        const double f = fd[i][static_cast<std::size_t>(k)];
        if (std::abs(a) < 1e-8 && std::abs(f) < 1e-8) continue;
        EXPECT_LT(relative_error(a, f), 1e-4) << "gaussian " << i << " param " << k;
      }
    }
  }
}

TEST(RenderBackward, UpstreamShapeChecked) {
  Rng rng(30);
  const RasterGrid grid = small_grid();
  const MapElement e = random_element(rng, 3, grid);
  EXPECT_THROW(render_backward(e, grid, std::vector<double>(7, 0.0)), ShapeError);
}

TEST(RenderBackward, CulledGradientConsistentWithCulledForward) {
  Rng rng(31);
  const RasterGrid grid{24, 16, -6.0, 6.0, -4.0, 4.0};
  const double cutoff = 3.0;
  const MapElement e = random_element(rng, 6, grid);
  std::vector<double> upstream(static_cast<std::size_t>(grid.size()));
  for (double& u : upstream) u = rng.uniform(-1.0, 1.0);
  const auto loss = [&](const MapElement& elem) {
    const DensityMask mask = render_element(elem, grid, cutoff);
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.values.size(); ++i) acc += upstream[i] * mask.values[i];
    return acc;
  };
  const auto analytic = render_backward(e, grid, upstream, cutoff);
  const auto fd = element_central_difference(loss, e, 1e-7);
  int close = 0, checked = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    for (int k = 0; k < 5; ++k) {
      const double a = analytic[i][static_cast<std::size_t>(k)];
      const double f = fd[i][static_cast<std::size_t>(k)];
      if (std::abs(a) < 1e-6 && std::abs(f) < 1e-6) continue;
      ++checked;
      if (relative_error(a, f) < 1e-3) ++close;
    }
  }
  // A parameter whose difference step straddles a culling boundary sees the
  // forward jump; the bulk must still agree.
  EXPECT_GE(close, checked * 9 / 10);
}
