#pragma once

#include <set>

#include "gsmap/serialize.hpp"

namespace gsmap {

// Aggregate run configuration consumed by the CLI. Every field is optional in
// the JSON document; defaults equal the module-level defaults. Unknown keys
// are rejected by name.
struct RunConfig {
  std::uint64_t seed = 1;
  RasterGrid grid;
  int scene_dividers = 2;
  int scene_boundaries = 1;
  int scene_crossings = 1;
  double curvature_min = 0.0;
  double curvature_max = 1.5;
  double half_width = kDefaultHalfWidth;
  int supersample = kDefaultSupersample;
  int n_points = kDefaultGaussiansPerElement;
  FitConfig fit;
  EvalConfig eval;

  // Scene k of a run gets its own derived seed.
  SceneSpec scene_spec(int scene_index = 0) const {
    SceneSpec spec;
    spec.seed = seed + static_cast<std::uint64_t>(scene_index);
    spec.grid = grid;
    spec.num_dividers = scene_dividers;
    spec.num_boundaries = scene_boundaries;
    spec.num_crossings = scene_crossings;
    spec.curvature_min = curvature_min;
    spec.curvature_max = curvature_max;
    spec.half_width = half_width;
    spec.supersample = supersample;
    spec.n_points = n_points;
    return spec;
  }

  FitConfig fit_config() const {
    FitConfig cfg = fit;
    cfg.seed = seed;
    return cfg;
  }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& prefix) {
  if (!j.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.contains(key))
      throw ConfigError("unknown config key: " + (prefix.empty() ? key : prefix + "." + key));
  }
}

template <typename T>
void assign_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"seed", "grid", "scene", "fit", "weights", "eval"}, "");
  RunConfig cfg;
  try {
    detail::assign_if(j, "seed", cfg.seed);
    if (j.contains("grid")) {
      detail::reject_unknown_keys(j.at("grid"),
                                  {"width_px", "height_px", "x_min", "x_max", "y_min", "y_max"},
                                  "grid");
      const auto& g = j.at("grid");
      detail::assign_if(g, "width_px", cfg.grid.width_px);
      detail::assign_if(g, "height_px", cfg.grid.height_px);
      detail::assign_if(g, "x_min", cfg.grid.x_min);
      detail::assign_if(g, "x_max", cfg.grid.x_max);
      detail::assign_if(g, "y_min", cfg.grid.y_min);
      detail::assign_if(g, "y_max", cfg.grid.y_max);
      validate(cfg.grid);
    }
    if (j.contains("scene")) {
      detail::reject_unknown_keys(j.at("scene"),
                                  {"dividers", "boundaries", "crossings", "curvature_min",
                                   "curvature_max", "half_width", "supersample", "n_points"},
                                  "scene");
      const auto& s = j.at("scene");
      detail::assign_if(s, "dividers", cfg.scene_dividers);
      detail::assign_if(s, "boundaries", cfg.scene_boundaries);
      detail::assign_if(s, "crossings", cfg.scene_crossings);
      detail::assign_if(s, "curvature_min", cfg.curvature_min);
      detail::assign_if(s, "curvature_max", cfg.curvature_max);
      detail::assign_if(s, "half_width", cfg.half_width);
      detail::assign_if(s, "supersample", cfg.supersample);
      detail::assign_if(s, "n_points", cfg.n_points);
    }
    if (j.contains("fit")) {
      detail::reject_unknown_keys(
          j.at("fit"),
          {"iterations", "lr_mu", "lr_log_sigma", "lr_theta", "beta1", "beta2", "eps",
           "sigma_floor", "rematch_every", "cutoff_sigmas", "noise_sigma", "n_gaussians"},
          "fit");
      const auto& f = j.at("fit");
      detail::assign_if(f, "iterations", cfg.fit.iterations);
      detail::assign_if(f, "lr_mu", cfg.fit.lr_mu);
      detail::assign_if(f, "lr_log_sigma", cfg.fit.lr_log_sigma);
      detail::assign_if(f, "lr_theta", cfg.fit.lr_theta);
      detail::assign_if(f, "beta1", cfg.fit.beta1);
      detail::assign_if(f, "beta2", cfg.fit.beta2);
      detail::assign_if(f, "eps", cfg.fit.eps);
      detail::assign_if(f, "sigma_floor", cfg.fit.sigma_floor);
      detail::assign_if(f, "rematch_every", cfg.fit.rematch_every);
      detail::assign_if(f, "cutoff_sigmas", cfg.fit.cutoff_sigmas);
      detail::assign_if(f, "noise_sigma", cfg.fit.noise_sigma);
      detail::assign_if(f, "n_gaussians", cfg.fit.n_gaussians);
    }
    if (j.contains("weights")) {
      detail::reject_unknown_keys(j.at("weights"), {"lambda_v", "lambda_r", "lambda_alpha", "w_pos"},
                                  "weights");
      const auto& w = j.at("weights");
      detail::assign_if(w, "lambda_v", cfg.fit.weights.lambda_v);
      detail::assign_if(w, "lambda_r", cfg.fit.weights.lambda_r);
      detail::assign_if(w, "lambda_alpha", cfg.fit.weights.lambda_alpha);
      if (w.contains("w_pos") && !w.at("w_pos").is_null())
        cfg.fit.weights.w_pos = w.at("w_pos").get<double>();
    }
    if (j.contains("eval")) {
      detail::reject_unknown_keys(j.at("eval"),
                                  {"chamfer_thresholds", "iou_thresholds_ped_crossing",
                                   "iou_thresholds_divider", "iou_thresholds_boundary",
                                   "binarize_at", "chamfer_samples"},
                                  "eval");
      const auto& e = j.at("eval");
      detail::assign_if(e, "chamfer_thresholds", cfg.eval.chamfer_thresholds);
      detail::assign_if(e, "iou_thresholds_ped_crossing",
                        cfg.eval.iou_thresholds_by_class[static_cast<std::size_t>(
                            static_cast<int>(MapClass::ped_crossing))]);
      detail::assign_if(e, "iou_thresholds_divider",
                        cfg.eval.iou_thresholds_by_class[static_cast<std::size_t>(
                            static_cast<int>(MapClass::divider))]);
      detail::assign_if(e, "iou_thresholds_boundary",
                        cfg.eval.iou_thresholds_by_class[static_cast<std::size_t>(
                            static_cast<int>(MapClass::boundary))]);
      detail::assign_if(e, "binarize_at", cfg.eval.binarize_at);
      detail::assign_if(e, "chamfer_samples", cfg.eval.chamfer_samples);
      validate(cfg.eval);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  validate(cfg.fit);
  cfg.eval.cutoff_sigmas = cfg.fit.cutoff_sigmas;
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(load_json(path));
}

}  // namespace gsmap
