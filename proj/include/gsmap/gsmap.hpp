#pragma once

#include "gsmap/common.hpp"
#include "gsmap/config.hpp"
#include "gsmap/fitting.hpp"
#include "gsmap/gaussian.hpp"
#include "gsmap/grid.hpp"
#include "gsmap/losses.hpp"
#include "gsmap/matching.hpp"
#include "gsmap/metrics.hpp"
#include "gsmap/polyline.hpp"
#include "gsmap/rasterize.hpp"
#include "gsmap/scene.hpp"
#include "gsmap/serialize.hpp"
