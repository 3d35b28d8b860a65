#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gsmap/fitting.hpp"

namespace gsmap {

using json = nlohmann::ordered_json;

// ---- PGM (P5, maxval 255, row-major from the y_min row) ----

inline void write_pgm(const std::filesystem::path& path, const DensityMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << mask.grid.width_px << " " << mask.grid.height_px << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(mask.values.size());
  for (double v : mask.values)
    bytes.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing: " + path.string());
}

inline DensityMask read_pgm(const std::filesystem::path& path, const RasterGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255) throw IoError("unsupported PGM: " + path.string());
  if (w != grid.width_px || h != grid.height_px)
    throw ShapeError("PGM resolution does not match grid: " + path.string());
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("truncated PGM: " + path.string());
  DensityMask mask = DensityMask::zeros(grid);
  for (std::size_t i = 0; i < bytes.size(); ++i) mask.values[i] = bytes[i] / 255.0;
  return mask;
}

// ---- Shared JSON fragments ----

inline json to_json(const RasterGrid& g) {
  return {{"width_px", g.width_px}, {"height_px", g.height_px}, {"x_min", g.x_min},
          {"x_max", g.x_max},       {"y_min", g.y_min},         {"y_max", g.y_max}};
}

inline RasterGrid grid_from_json(const json& j) {
  RasterGrid g;
  g.width_px = j.at("width_px").get<int>();
  g.height_px = j.at("height_px").get<int>();
  g.x_min = j.at("x_min").get<double>();
  g.x_max = j.at("x_max").get<double>();
  g.y_min = j.at("y_min").get<double>();
  g.y_max = j.at("y_max").get<double>();
  validate(g);
  return g;
}

inline json to_json(const Polyline& p) {
  json pts = json::array();
  for (const auto& v : p.points) pts.push_back(json::array({v.x, v.y}));
  return pts;
}

inline std::vector<Vec2> points_from_json(const json& j) {
  std::vector<Vec2> out;
  for (const auto& pt : j) out.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
  return out;
}

// ---- Scene files ----

inline json to_json(const Scene& scene) {
  json j;
  j["format"] = "gsmap_scene";
  j["version"] = 1;
  j["seed"] = scene.seed;
  j["grid"] = to_json(scene.grid);
  j["supersample"] = scene.supersample;
  j["n_points"] = scene.n_points;
  json elems = json::array();
  for (const auto& e : scene.elements) {
    json je;
    je["class"] = to_string(e.class_id);
    je["closed"] = e.vertices.closed;
    je["half_width"] = e.half_width;
    je["vertices"] = to_json(e.vertices);
    elems.push_back(std::move(je));
  }
  j["elements"] = std::move(elems);
  return j;
}

// Masks referenced by file are read back; otherwise they are regenerated
// from the geometry, which is deterministic.
inline Scene scene_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  if (j.value("format", "") != "gsmap_scene") throw IoError("not a gsmap scene document");
  Scene scene;
  scene.seed = j.value("seed", 0ull);
  scene.grid = grid_from_json(j.at("grid"));
  scene.supersample = j.value("supersample", kDefaultSupersample);
  scene.n_points = j.value("n_points", kDefaultGaussiansPerElement);
  for (const auto& je : j.at("elements")) {
    GroundTruthElement e;
    e.class_id = map_class_from_string(je.at("class").get<std::string>());
    e.vertices.closed = je.at("closed").get<bool>();
    e.vertices.points = points_from_json(je.at("vertices"));
    validate(e.vertices);
    e.half_width = je.value("half_width", kDefaultHalfWidth);
    e.resampled = resample_uniform(e.vertices, scene.n_points);
    if (je.contains("mask_pgm")) {
      e.mask = read_pgm(base_dir / je.at("mask_pgm").get<std::string>(), scene.grid);
      for (double v : e.mask.values)
        if (v != 0.0 && v != 1.0) throw IoError("GT mask PGM must be binary");
    } else {
      e.mask = gt_mask(e.vertices, e.class_id, scene.grid, e.half_width, scene.supersample);
    }
    scene.elements.push_back(std::move(e));
  }
  return scene;
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing: " + path.string());
}

inline Scene load_scene(const std::filesystem::path& path) {
  return scene_from_json(load_json(path), path.parent_path());
}

// ---- Gaussian map files ----

inline json to_json(const GaussianMap& map) {
  json j;
  j["format"] = "gsmap_map";
  j["version"] = 1;
  json elems = json::array();
  for (const auto& e : map.elements) {
    json je;
    je["class"] = to_string(e.class_id);
    je["closed"] = e.closed;
    je["score"] = e.score;
    json gs = json::array();
    for (const auto& g : e.gaussians)
      gs.push_back(json::array({g.mu_x, g.mu_y, g.sigma_x, g.sigma_y, g.theta}));
    je["gaussians"] = std::move(gs);
    elems.push_back(std::move(je));
  }
  j["elements"] = std::move(elems);
  return j;
}

inline GaussianMap map_from_json(const json& j) {
  if (j.value("format", "") != "gsmap_map") throw IoError("not a gsmap map document");
  GaussianMap map;
  for (const auto& je : j.at("elements")) {
    MapElement e;
    e.class_id = map_class_from_string(je.at("class").get<std::string>());
    e.closed = je.at("closed").get<bool>();
    const auto& score = je.at("score");
    for (int c = 0; c < kNumClasses; ++c) e.score[static_cast<std::size_t>(c)] = score.at(c).get<double>();
    for (const auto& jg : je.at("gaussians"))
      e.gaussians.push_back({jg.at(0).get<double>(), jg.at(1).get<double>(), jg.at(2).get<double>(),
                             jg.at(3).get<double>(), jg.at(4).get<double>()});
    validate(e);
    map.elements.push_back(std::move(e));
  }
  return map;
}

inline GaussianMap load_map(const std::filesystem::path& path) {
  return map_from_json(load_json(path));
}

// ---- Vector export (GeoJSON-compatible) ----

inline json vectors_to_geojson(const GaussianMap& map) {
  json features = json::array();
  for (std::size_t i = 0; i < map.elements.size(); ++i) {
    const auto& e = map.elements[i];
    const Polyline poly = vectorize(e);
    json coords = json::array();
    for (const auto& p : poly.points) coords.push_back(json::array({p.x, p.y}));
    json geometry;
    if (e.closed) {
      coords.push_back(coords.front());  // GeoJSON rings repeat the first point
      geometry = {{"type", "Polygon"}, {"coordinates", json::array({coords})}};
    } else {
      geometry = {{"type", "LineString"}, {"coordinates", coords}};
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", geometry},
                        {"properties",
                         {{"class", to_string(e.class_id)},
                          {"closed", e.closed},
                          {"score", e.score},
                          {"element_index", i}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

// Rebuilds a GaussianMap whose centers are the feature vertices; scales and
// orientation take the generic init values since the vector form does not
// carry them.
inline GaussianMap vectors_from_geojson(const json& j) {
  if (j.value("type", "") != "FeatureCollection") throw IoError("not a GeoJSON FeatureCollection");
  GaussianMap map;
  for (const auto& f : j.at("features")) {
    MapElement e;
    const auto& props = f.at("properties");
    e.class_id = map_class_from_string(props.at("class").get<std::string>());
    e.closed = props.at("closed").get<bool>();
    const auto& score = props.at("score");
    for (int c = 0; c < kNumClasses; ++c) e.score[static_cast<std::size_t>(c)] = score.at(c).get<double>();
    const auto& geometry = f.at("geometry");
    json coords = geometry.at("coordinates");
    if (geometry.at("type").get<std::string>() == "Polygon") {
      coords = coords.at(0);
      coords.erase(coords.size() - 1);  // drop the repeated ring-closing point
    }
    for (const auto& pt : coords) {
      Gaussian2D g;
      g.mu_x = pt.at(0).get<double>();
      g.mu_y = pt.at(1).get<double>();
      g.sigma_x = 0.5;
      g.sigma_y = 0.15;
      g.theta = 0.0;
      e.gaussians.push_back(g);
    }
    validate(e);
    map.elements.push_back(std::move(e));
  }
  return map;
}

// ---- Fit reports ----

// Wall time is intentionally not serialized: reports must be byte-identical
// across reruns of the same config.
inline json to_json(const FitReport& report) {
  const auto step_json = [](const FitReport::Step& s) {
    return json{{"total", s.total}, {"cls", s.cls}, {"vector", s.vector}, {"raster", s.raster}};
  };
  json j;
  j["format"] = "gsmap_fit_report";
  j["version"] = 1;
  j["iterations"] = report.trajectory.size();
  j["convergence_iteration"] = report.convergence_iteration;
  if (!report.trajectory.empty()) j["initial"] = step_json(report.trajectory.front());
  json final_j = step_json(report.final_loss);
  final_j["chamfer"] = report.mean_chamfer;
  final_j["iou"] = report.mean_iou;
  final_j["per_element_chamfer"] = report.final_chamfer;
  final_j["per_element_iou"] = report.final_iou;
  j["final"] = std::move(final_j);
  json total = json::array(), cls = json::array(), vec = json::array(), ras = json::array();
  for (const auto& s : report.trajectory) {
    total.push_back(s.total);
    cls.push_back(s.cls);
    vec.push_back(s.vector);
    ras.push_back(s.raster);
  }
  j["trajectory"] = {{"total", std::move(total)},
                     {"cls", std::move(cls)},
                     {"vector", std::move(vec)},
                     {"raster", std::move(ras)}};
  return j;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const FitReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "iteration,total,cls,vector,raster\n";
  for (std::size_t i = 0; i < report.trajectory.size(); ++i) {
    const auto& s = report.trajectory[i];
    out << i << "," << json(s.total).dump() << "," << json(s.cls).dump() << ","
        << json(s.vector).dump() << "," << json(s.raster).dump() << "\n";
  }
}

// ---- Metric reports ----

inline json to_json(const ApReport& report) {
  json per_class = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& entry = report.per_class[static_cast<std::size_t>(c)];
    const char* name = to_string(static_cast<MapClass>(c));
    if (!entry) {
      per_class[name] = nullptr;  // class absent from GT: AP undefined
      continue;
    }
    json by_threshold = json::object();
    for (const auto& [tau, ap] : entry->by_threshold) by_threshold[json(tau).dump()] = ap;
    per_class[name] = {{"by_threshold", std::move(by_threshold)}, {"mean", entry->mean}};
  }
  json j;
  j["per_class"] = std::move(per_class);
  j["mean"] = report.mean ? json(*report.mean) : json(nullptr);
  return j;
}

inline json metrics_report_json(const ApReport& chamfer, const ApReport& raster) {
  return {{"ap_chamfer", to_json(chamfer)}, {"ap_raster", to_json(raster)}};
}

}  // namespace gsmap
