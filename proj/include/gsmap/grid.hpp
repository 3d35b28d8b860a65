#pragma once

#include <vector>

#include "gsmap/common.hpp"

namespace gsmap {

// BEV pixel grid with metric extent. Pixel (row, col) covers a dx-by-dy cell;
// its center is (x_min + (col+0.5)dx, y_min + (row+0.5)dy). Row 0 is the
// y_min edge.
struct RasterGrid {
  int width_px = 200;
  int height_px = 100;
  double x_min = -30.0;
  double x_max = 30.0;
  double y_min = -15.0;
  double y_max = 15.0;

  double dx() const { return (x_max - x_min) / width_px; }
  double dy() const { return (y_max - y_min) / height_px; }
  int size() const { return width_px * height_px; }

  Vec2 pixel_center(int row, int col) const {
    return {x_min + (col + 0.5) * dx(), y_min + (row + 0.5) * dy()};
  }

  bool operator==(const RasterGrid&) const = default;
};

inline void validate(const RasterGrid& g) {
  if (g.width_px < 1 || g.height_px < 1) throw ConfigError("RasterGrid: resolution must be >= 1");
  const bool finite = std::isfinite(g.x_min) && std::isfinite(g.x_max) && std::isfinite(g.y_min) &&
                      std::isfinite(g.y_max);
  if (!finite || g.x_max <= g.x_min || g.y_max <= g.y_min)
    throw ConfigError("RasterGrid: extent must be finite with x_max > x_min, y_max > y_min");
}

// Row-major scalar field over a grid. Occupancy masks keep values in [0, 1];
// gradient fields reuse the same container without the range restriction.
struct DensityMask {
  RasterGrid grid;
  std::vector<double> values;

  static DensityMask zeros(const RasterGrid& g) {
    validate(g);
    return {g, std::vector<double>(static_cast<std::size_t>(g.size()), 0.0)};
  }

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * grid.width_px + col]; }
  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * grid.width_px + col];
  }
};

inline void require_same_grid(const DensityMask& a, const DensityMask& b) {
  if (!(a.grid == b.grid)) throw ShapeError("masks live on different grids");
}

inline void require_field_shape(const RasterGrid& grid, const std::vector<double>& field) {
  if (static_cast<int>(field.size()) != grid.size())
    throw ShapeError("per-pixel field size does not match grid");
}

}  // namespace gsmap
