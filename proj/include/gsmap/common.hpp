#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gsmap {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gaussian with non-finite fields or non-positive scales.
struct InvalidPrimitiveError : Error {
  using Error::Error;
};
// Invalid grid, option or weight values.
struct ConfigError : Error {
  using Error::Error;
};
// Mismatched array dimensions or point cardinalities.
struct ShapeError : Error {
  using Error::Error;
};
// Zero-length polylines and similar unusable geometry.
struct DegenerateGeometryError : Error {
  using Error::Error;
};
// Non-finite entries in an assignment cost matrix.
struct InvalidCostError : Error {
  using Error::Error;
};
// Scene recipe that cannot fit the grid extent.
struct GenerationError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Non-finite loss, gradient or parameter during optimization.
struct DivergedError : Error {
  int iteration;
  DivergedError(const std::string& msg, int iter) : Error(msg), iteration(iter) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Mat2 {
  // Row-major: [[m00, m01], [m10, m11]].
  double m00 = 0.0, m01 = 0.0, m10 = 0.0, m11 = 0.0;

  Vec2 operator*(Vec2 v) const { return {m00 * v.x + m01 * v.y, m10 * v.x + m11 * v.y}; }
  double det() const { return m00 * m11 - m01 * m10; }
  double trace() const { return m00 + m11; }
};

// Deterministic RNG with portable output. std::mt19937_64 produces a
// bit-exact sequence on every platform; the distributions here are
// hand-rolled because the standard library distributions are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  // Standard normal via Box-Muller (no cached spare, keeps state simple).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  int sign() { return bernoulli(0.5) ? 1 : -1; }

 private:
  std::mt19937_64 engine_;
};

// Worker budget for the few loops that are allowed to parallelize.
// GSMAP_THREADS caps the count; 0 or unset means auto.
inline int worker_count() {
  if (const char* env = std::getenv("GSMAP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Static chunked parallel loop. Each index is processed exactly once and
// writes must go to disjoint slots, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gsmap
