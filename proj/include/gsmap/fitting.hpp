#pragma once

#include <chrono>
#include <functional>
#include <vector>

#include "gsmap/metrics.hpp"

namespace gsmap {

struct FitConfig {
  int iterations = 2000;
  // Per-parameter-group learning rates; sigma is optimized in log space.
  double lr_mu = 0.05;
  double lr_log_sigma = 0.02;
  double lr_theta = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double sigma_floor = 0.05;  // meters
  int rematch_every = 50;
  std::uint64_t seed = 1;
  LossWeights weights;
  double cutoff_sigmas = kDefaultCutoffSigmas;
  double noise_sigma = 0.5;  // init center noise, meters
  int n_gaussians = kDefaultGaussiansPerElement;
};

inline void validate(const FitConfig& cfg) {
  if (cfg.iterations < 0) throw ConfigError("FitConfig: iterations must be >= 0");
  if (!(cfg.lr_mu > 0.0) || !(cfg.lr_log_sigma > 0.0) || !(cfg.lr_theta > 0.0))
    throw ConfigError("FitConfig: learning rates must be positive");
  if (!(cfg.sigma_floor > 0.0)) throw ConfigError("FitConfig: sigma_floor must be positive");
  if (cfg.rematch_every < 1) throw ConfigError("FitConfig: rematch_every must be >= 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("FitConfig: betas must lie in [0,1)");
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("FitConfig: noise_sigma must be >= 0");
  if (cfg.n_gaussians < 2) throw ConfigError("FitConfig: n_gaussians must be >= 2");
  validate(cfg.weights);
}

struct FitReport {
  struct Step {
    double total = 0.0;
    double cls = 0.0;
    double vector = 0.0;
    double raster = 0.0;
  };
  std::vector<Step> trajectory;  // loss at the start of each iteration
  Step final_loss;
  std::vector<double> final_chamfer;  // per matched element
  std::vector<double> final_iou;
  double mean_chamfer = 0.0;
  double mean_iou = 0.0;
  int convergence_iteration = 0;
  double wall_time_s = 0.0;  // excluded from serialized reports
};

// One noisy element per GT element: centers on the resampled GT polyline,
// sigma at a fixed anisotropic init, theta along the local segment direction,
// score one-hot at the true class.
inline GaussianMap init_elements(const Scene& gt, double noise_sigma, Rng& rng,
                                 int n_gaussians = kDefaultGaussiansPerElement) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("init_elements: noise_sigma must be >= 0");
  GaussianMap map;
  for (const auto& gt_elem : gt.elements) {
    const Polyline pts = detail::gt_points_for(gt_elem, n_gaussians);
    MapElement e;
    e.class_id = gt_elem.class_id;
    e.closed = gt_elem.vertices.closed;
    e.score.fill(0.0);
    e.score[static_cast<std::size_t>(static_cast<int>(e.class_id))] = 1.0;
    e.gaussians.resize(static_cast<std::size_t>(n_gaussians));
    const int n = n_gaussians;
    for (int i = 0; i < n; ++i) {
      auto& g = e.gaussians[static_cast<std::size_t>(i)];
      g.mu_x = pts.points[static_cast<std::size_t>(i)].x + noise_sigma * rng.normal();
      g.mu_y = pts.points[static_cast<std::size_t>(i)].y + noise_sigma * rng.normal();
      g.sigma_x = 0.5;
      g.sigma_y = 0.15;
      const int prev = e.closed ? (i + n - 1) % n : std::max(0, i - 1);
      const int next = e.closed ? (i + 1) % n : std::min(n - 1, i + 1);
      const Vec2 d = pts.points[static_cast<std::size_t>(next)] - pts.points[static_cast<std::size_t>(prev)];
      g.theta = canonicalize_theta(std::atan2(d.y, d.x));
    }
    map.elements.push_back(std::move(e));
  }
  return map;
}

// Optional per-iteration observer: called after each optimizer step.
using FitObserver = std::function<void(int iteration, const GaussianMap&)>;

namespace detail {

inline constexpr int kParamsPerGaussian = 5;  // mu_x, mu_y, log sx, log sy, theta

struct FlatParams {
  std::vector<double> values;  // optimizer space
  std::vector<int> element_offset;

  static FlatParams from_map(const GaussianMap& map) {
    FlatParams fp;
    fp.element_offset.reserve(map.elements.size() + 1);
    fp.element_offset.push_back(0);
    for (const auto& e : map.elements)
      fp.element_offset.push_back(fp.element_offset.back() +
                                  static_cast<int>(e.gaussians.size()) * kParamsPerGaussian);
    fp.values.resize(static_cast<std::size_t>(fp.element_offset.back()));
    for (std::size_t ei = 0; ei < map.elements.size(); ++ei) {
      double* slot = &fp.values[static_cast<std::size_t>(fp.element_offset[ei])];
      for (const auto& g : map.elements[ei].gaussians) {
        *slot++ = g.mu_x;
        *slot++ = g.mu_y;
        *slot++ = std::log(g.sigma_x);
        *slot++ = std::log(g.sigma_y);
        *slot++ = g.theta;
      }
    }
    return fp;
  }

  void write_back(GaussianMap& map) const {
    for (std::size_t ei = 0; ei < map.elements.size(); ++ei) {
      const double* slot = &values[static_cast<std::size_t>(element_offset[ei])];
      for (auto& g : map.elements[ei].gaussians) {
        g.mu_x = *slot++;
        g.mu_y = *slot++;
        g.sigma_x = std::exp(*slot++);
        g.sigma_y = std::exp(*slot++);
        g.theta = *slot++;
      }
    }
  }
};

}  // namespace detail

// Adaptive-moment gradient descent on (mu, log sigma, theta) of every
// element against the joint objective. Matching is refreshed every
// rematch_every iterations and frozen in between; sigma is re-floored and
// theta canonicalized after every step. Deterministic given inputs.
inline std::pair<GaussianMap, FitReport> fit(const GaussianMap& map0, const Scene& gt,
                                             const RasterGrid& grid, const FitConfig& cfg,
                                             const FitObserver& observer = {}) {
  validate(cfg);
  validate(map0);
  const auto t_start = std::chrono::steady_clock::now();

  GaussianMap map = map0;
  detail::FlatParams params = detail::FlatParams::from_map(map);
  std::vector<double> m(params.values.size(), 0.0);
  std::vector<double> v(params.values.size(), 0.0);
  const double lr_by_kind[detail::kParamsPerGaussian] = {cfg.lr_mu, cfg.lr_mu, cfg.lr_log_sigma,
                                                         cfg.lr_log_sigma, cfg.lr_theta};
  const double log_floor = std::log(cfg.sigma_floor);

  FitReport report;
  report.trajectory.reserve(static_cast<std::size_t>(cfg.iterations));

  MatchResult match;
  std::vector<std::vector<ParamGrad>> grads;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    if (iter % cfg.rematch_every == 0) match = match_map(map, gt, grid, cfg.cutoff_sigmas);

    const MapLossResult loss =
        map_loss(map, gt, grid, cfg.weights, match, &grads, cfg.cutoff_sigmas);
    if (!std::isfinite(loss.total))
      throw DivergedError("fit: non-finite loss at iteration " + std::to_string(iter), iter);

    FitReport::Step step;
    step.total = loss.total;
    for (const auto& b : loss.per_element) {
      step.cls += b.cls;
      step.vector += b.vector;
      step.raster += b.raster;
    }
    report.trajectory.push_back(step);

    // Chain gradients into optimizer space (sigma -> log sigma) and take one
    // Adam step per parameter.
    const double bias1 = 1.0 - std::pow(cfg.beta1, iter + 1);
    const double bias2 = 1.0 - std::pow(cfg.beta2, iter + 1);
    for (std::size_t ei = 0; ei < map.elements.size(); ++ei) {
      auto& elem = map.elements[ei];
      double* base = &params.values[static_cast<std::size_t>(params.element_offset[ei])];
      for (std::size_t gi = 0; gi < elem.gaussians.size(); ++gi) {
        const ParamGrad& pg = grads[ei][gi];
        const auto& g = elem.gaussians[gi];
        const double grad_by_kind[detail::kParamsPerGaussian] = {
            pg[0], pg[1], pg[2] * g.sigma_x, pg[3] * g.sigma_y, pg[4]};
        for (int k = 0; k < detail::kParamsPerGaussian; ++k) {
          const double grad = grad_by_kind[k];
          if (!std::isfinite(grad))
            throw DivergedError("fit: non-finite gradient at iteration " + std::to_string(iter),
                                iter);
          const std::size_t idx = gi * detail::kParamsPerGaussian + static_cast<std::size_t>(k) +
                                  static_cast<std::size_t>(params.element_offset[ei]);
          m[idx] = cfg.beta1 * m[idx] + (1.0 - cfg.beta1) * grad;
          v[idx] = cfg.beta2 * v[idx] + (1.0 - cfg.beta2) * grad * grad;
          const double m_hat = m[idx] / bias1;
          const double v_hat = v[idx] / bias2;
          base[gi * detail::kParamsPerGaussian + static_cast<std::size_t>(k)] -=
              lr_by_kind[k] * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        // Keep sigma floored and theta canonical in optimizer space.
        double* slot = base + gi * detail::kParamsPerGaussian;
        slot[2] = std::max(slot[2], log_floor);
        slot[3] = std::max(slot[3], log_floor);
        slot[4] = canonicalize_theta(slot[4]);
      }
    }
    for (double p : params.values)
      if (!std::isfinite(p))
        throw DivergedError("fit: non-finite parameter at iteration " + std::to_string(iter), iter);
    params.write_back(map);
    if (observer) observer(iter, map);
  }

  // Final loss and per-element metrics under a fresh match.
  match = match_map(map, gt, grid, cfg.cutoff_sigmas);
  const MapLossResult final_loss =
      map_loss(map, gt, grid, cfg.weights, match, nullptr, cfg.cutoff_sigmas);
  report.final_loss.total = final_loss.total;
  for (const auto& b : final_loss.per_element) {
    report.final_loss.cls += b.cls;
    report.final_loss.vector += b.vector;
    report.final_loss.raster += b.raster;
  }
  for (const auto& pair : match.pairs) {
    const auto& e = map.elements[static_cast<std::size_t>(pair.pred_index)];
    const auto& t = gt.elements[static_cast<std::size_t>(pair.gt_index)];
    report.final_chamfer.push_back(chamfer_distance(vectorize(e), t.vertices));
    report.final_iou.push_back(
        hard_iou(render_element(e, grid, cfg.cutoff_sigmas), t.mask, 0.5));
  }
  if (!report.final_chamfer.empty()) {
    for (double c : report.final_chamfer) report.mean_chamfer += c;
    report.mean_chamfer /= static_cast<double>(report.final_chamfer.size());
    for (double i : report.final_iou) report.mean_iou += i;
    report.mean_iou /= static_cast<double>(report.final_iou.size());
  }
  report.convergence_iteration = static_cast<int>(report.trajectory.size());
  for (std::size_t i = 0; i < report.trajectory.size(); ++i) {
    if (report.trajectory[i].total <= report.final_loss.total * 1.01 + 1e-12) {
      report.convergence_iteration = static_cast<int>(i);
      break;
    }
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(map), std::move(report)};
}

enum class SweepParam { lambda_r, n_gaussians };

struct SweepRow {
  double value = 0.0;
  double ap_chamfer = 0.0;
  double ap_raster = 0.0;
};

namespace detail {

inline std::uint64_t scene_fit_seed(std::uint64_t base, std::size_t scene_index) {
  return base + 1000003ull * static_cast<std::uint64_t>(scene_index);
}

}  // namespace detail

// Fits every scene for each parameter value and reports the resulting AP
// pair per value. Initialization is re-derived per scene from the config
// seed, so rows are deterministic.
inline std::vector<SweepRow> sweep(SweepParam param, const std::vector<double>& values,
                                   const std::vector<Scene>& scenes, const FitConfig& base_cfg,
                                   const EvalConfig& eval_cfg = {}) {
  validate(base_cfg);
  std::vector<SweepRow> rows;
  for (double value : values) {
    FitConfig cfg = base_cfg;
    if (param == SweepParam::lambda_r) {
      cfg.weights.lambda_r = value;
    } else {
      cfg.n_gaussians = static_cast<int>(value);
    }
    validate(cfg);
    std::vector<GaussianMap> fitted(scenes.size());
    parallel_for(static_cast<int>(scenes.size()), [&](int s) {
      const auto& scene = scenes[static_cast<std::size_t>(s)];
      Rng rng(detail::scene_fit_seed(cfg.seed, static_cast<std::size_t>(s)));
      GaussianMap init = init_elements(scene, cfg.noise_sigma, rng, cfg.n_gaussians);
      fitted[static_cast<std::size_t>(s)] = fit(init, scene, scene.grid, cfg).first;
    });
    SweepRow row;
    row.value = value;
    const ApReport chamfer = ap_chamfer(fitted, scenes, eval_cfg);
    const ApReport raster = ap_raster(fitted, scenes, eval_cfg);
    row.ap_chamfer = chamfer.mean.value_or(0.0);
    row.ap_raster = raster.mean.value_or(0.0);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gsmap
