// Command-line frontend: scene generation, gradient fitting, metric
// evaluation and ablation sweeps over Gaussian BEV maps.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "gsmap/gsmap.hpp"

namespace fs = std::filesystem;
using namespace gsmap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;
constexpr int kExitDiverged = 4;

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  if (!fs::exists(path)) throw IoError("config file not found: " + path);
  return load_run_config(path);
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory: " + dir.string());
}

std::string index_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d%s", stem, index, ext);
  return buf;
}

std::string elem_mask_name(const std::string& scene_stem, int elem) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_elem_%03d.pgm", elem);
  return scene_stem + buf;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir, int count) {
  const RunConfig cfg = load_config_or_default(config_path);
  if (count < 0) throw ConfigError("--count must be >= 0");
  if (count > 0) ensure_out_dir(out_dir);
  for (int k = 0; k < count; ++k) {
    const Scene scene = generate_scene(cfg.scene_spec(k));
    const std::string stem = index_name("scene", k, "");
    json j = to_json(scene);
    for (std::size_t e = 0; e < scene.elements.size(); ++e) {
      const std::string mask_name = elem_mask_name(stem, static_cast<int>(e));
      write_pgm(fs::path(out_dir) / mask_name, scene.elements[e].mask);
      j["elements"][e]["mask_pgm"] = mask_name;
    }
    save_json(fs::path(out_dir) / (stem + ".json"), j);
  }
  return kExitOk;
}

int cmd_fit(const std::string& scene_path, const std::string& config_path,
            const std::string& out_dir, bool write_csv) {
  const RunConfig cfg = load_config_or_default(config_path);
  if (!fs::exists(scene_path)) throw IoError("scene file not found: " + scene_path);
  const Scene scene = load_scene(scene_path);
  ensure_out_dir(out_dir);

  Rng rng(cfg.fit_config().seed);
  const GaussianMap init = init_elements(scene, cfg.fit.noise_sigma, rng, cfg.fit.n_gaussians);
  auto [fitted, report] = fit(init, scene, scene.grid, cfg.fit_config());

  save_json(fs::path(out_dir) / "fitted_map.json", to_json(fitted));
  save_json(fs::path(out_dir) / "report.json", to_json(report));
  save_json(fs::path(out_dir) / "timing.json", json{{"wall_time_s", report.wall_time_s}});
  save_json(fs::path(out_dir) / "vectors.json", vectors_to_geojson(fitted));
  const auto masks = render_map(fitted, scene.grid, cfg.fit.cutoff_sigmas);
  for (std::size_t e = 0; e < masks.size(); ++e)
    write_pgm(fs::path(out_dir) / elem_mask_name("fitted", static_cast<int>(e)), masks[e]);
  if (write_csv) write_trajectory_csv(fs::path(out_dir) / "trajectory.csv", report);

  std::cout << "fit: " << scene.elements.size() << " elements, " << report.trajectory.size()
            << " iterations, final loss " << report.final_loss.total << ", mean chamfer "
            << report.mean_chamfer << " m, mean IoU " << report.mean_iou << ", wall time "
            << report.wall_time_s << " s\n";
  return kExitOk;
}

std::vector<fs::path> json_files(const std::string& path) {
  if (!fs::exists(path)) throw IoError("path not found: " + path);
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  return files;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& config_path) {
  const RunConfig cfg = load_config_or_default(config_path);
  const auto pred_files = json_files(pred_path);
  const auto gt_files = json_files(gt_path);
  if (pred_files.size() != gt_files.size())
    throw ShapeError("eval: prediction and GT file counts differ");

  std::vector<GaussianMap> preds;
  std::vector<Scene> scenes;
  for (std::size_t i = 0; i < gt_files.size(); ++i) {
    preds.push_back(load_map(pred_files[i]));
    scenes.push_back(load_scene(gt_files[i]));
  }
  const ApReport chamfer = ap_chamfer(preds, scenes, cfg.eval);
  const ApReport raster = ap_raster(preds, scenes, cfg.eval);
  std::cout << metrics_report_json(chamfer, raster).dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& param_name, const std::string& values_csv,
              const std::string& scenes_dir, const std::string& config_path,
              const std::string& out_dir) {
  const RunConfig cfg = load_config_or_default(config_path);
  SweepParam param;
  if (param_name == "lambda_r") {
    param = SweepParam::lambda_r;
  } else if (param_name == "n_gaussians") {
    param = SweepParam::n_gaussians;
  } else {
    throw ConfigError("--param must be lambda_r or n_gaussians");
  }

  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < values_csv.size()) {
    std::size_t next = values_csv.find(',', pos);
    if (next == std::string::npos) next = values_csv.size();
    try {
      values.push_back(std::stod(values_csv.substr(pos, next - pos)));
    } catch (const std::exception&) {
      throw ConfigError("--values must be a comma-separated list of numbers");
    }
    pos = next + 1;
  }
  if (values.empty()) throw ConfigError("--values must not be empty");

  std::vector<Scene> scenes;
  for (const auto& f : json_files(scenes_dir)) scenes.push_back(load_scene(f));
  if (scenes.empty()) throw IoError("sweep: no scene files in " + scenes_dir);

  const auto rows = sweep(param, values, scenes, cfg.fit_config(), cfg.eval);

  ensure_out_dir(out_dir);
  json jrows = json::array();
  std::ofstream csv(fs::path(out_dir) / "sweep_results.csv");
  if (!csv) throw IoError("cannot open sweep_results.csv for writing");
  csv << "param,value,ap_chamfer,ap_raster\n";
  for (const auto& row : rows) {
    csv << param_name << "," << json(row.value).dump() << "," << json(row.ap_chamfer).dump() << ","
        << json(row.ap_raster).dump() << "\n";
    jrows.push_back({{"param", param_name},
                     {"value", row.value},
                     {"ap_chamfer", row.ap_chamfer},
                     {"ap_raster", row.ap_raster}});
    std::cout << param_name << "=" << row.value << "  ap_chamfer=" << row.ap_chamfer
              << "  ap_raster=" << row.ap_raster << "\n";
  }
  save_json(fs::path(out_dir) / "sweep_results.json", jrows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D-Gaussian BEV map toolkit: generate scenes, fit Gaussian maps, evaluate AP"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string scene_path, pred_path, gt_path, scenes_dir;
  std::string param_name, values_csv;
  int count = 1;
  bool write_csv = false;

  auto* generate = app.add_subcommand("generate", "Write synthetic scene files with GT masks");
  generate->add_option("--config", config_path, "Run config JSON");
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--count", count, "Number of scenes");

  auto* fit_cmd = app.add_subcommand("fit", "Fit a Gaussian map to one scene");
  fit_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  fit_cmd->add_option("--config", config_path, "Run config JSON");
  fit_cmd->add_option("--out", out_dir, "Output directory")->required();
  fit_cmd->add_flag("--csv", write_csv, "Also write trajectory.csv");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate AP metrics of predictions against GT");
  eval_cmd->add_option("--pred", pred_path, "Map JSON file or directory")->required();
  eval_cmd->add_option("--gt", gt_path, "Scene JSON file or directory")->required();
  eval_cmd->add_option("--config", config_path, "Run config JSON");

  auto* sweep_cmd = app.add_subcommand("sweep", "Fit a scene suite across parameter values");
  sweep_cmd->add_option("--param", param_name, "lambda_r or n_gaussians")->required();
  sweep_cmd->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep_cmd->add_option("--scenes", scenes_dir, "Directory of scene JSONs")->required();
  sweep_cmd->add_option("--config", config_path, "Run config JSON");
  sweep_cmd->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_dir, count);
    if (fit_cmd->parsed()) return cmd_fit(scene_path, config_path, out_dir, write_csv);
    if (eval_cmd->parsed()) return cmd_eval(pred_path, gt_path, config_path);
    if (sweep_cmd->parsed()) return cmd_sweep(param_name, values_csv, scenes_dir, config_path, out_dir);
  } catch (const DivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
