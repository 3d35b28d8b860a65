#pragma once

#include <map>
#include <optional>
#include <vector>

#include "gsmap/matching.hpp"

namespace gsmap {

struct EvalConfig {
  std::vector<double> chamfer_thresholds{0.5, 1.0, 1.5};
  // {0.25:0.5:0.05} for boundaries/dividers, {0.5:0.75:0.05} for crossings.
  std::array<std::vector<double>, kNumClasses> iou_thresholds_by_class{
      std::vector<double>{0.50, 0.55, 0.60, 0.65, 0.70, 0.75},
      std::vector<double>{0.25, 0.30, 0.35, 0.40, 0.45, 0.50},
      std::vector<double>{0.25, 0.30, 0.35, 0.40, 0.45, 0.50},
  };
  double binarize_at = 0.5;
  int chamfer_samples = kDefaultChamferSamples;
  double cutoff_sigmas = kDefaultCutoffSigmas;
};

inline void validate(const EvalConfig& cfg) {
  const auto increasing = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) return false;
    return !v.empty();
  };
  if (!increasing(cfg.chamfer_thresholds))
    throw ConfigError("EvalConfig: chamfer thresholds must be strictly increasing");
  for (const auto& t : cfg.iou_thresholds_by_class)
    if (!increasing(t)) throw ConfigError("EvalConfig: IoU thresholds must be strictly increasing");
  if (!(cfg.binarize_at > 0.0 && cfg.binarize_at < 1.0))
    throw ConfigError("EvalConfig: binarize_at must lie in (0,1)");
  if (cfg.chamfer_samples < 2) throw ConfigError("EvalConfig: chamfer_samples must be >= 2");
}

inline DensityMask binarize(const DensityMask& mask, double threshold) {
  DensityMask out = mask;
  for (double& v : out.values) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

// |A intersect B| / |A union B| on binarized masks; the empty-union case is
// defined as 1.
inline double hard_iou(const DensityMask& a, const DensityMask& b, double threshold = 0.5) {
  require_same_grid(a, b);
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool fa = a.values[i] >= threshold;
    const bool fb = b.values[i] >= threshold;
    inter += (fa && fb) ? 1 : 0;
    uni += (fa || fb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct ApPerClass {
  std::vector<std::pair<double, double>> by_threshold;  // (threshold, AP)
  double mean = 0.0;
};

struct ApReport {
  // Classes with no ground truth are absent, not zero.
  std::array<std::optional<ApPerClass>, kNumClasses> per_class;
  std::optional<double> mean;
};

namespace detail {

struct Candidate {
  double score = 0.0;
  int scene = 0;
  int element = 0;
  // Affinity to every same-scene same-class GT element: distance for the
  // chamfer metric (lower better), IoU for the raster metric (higher better).
  std::vector<std::pair<int, double>> affinities;
};

// Score-ordered greedy matching against at-most-once GT, exact all-point AP
// integration over the monotone precision envelope.
inline double average_precision(const std::vector<Candidate>& sorted, int n_gt,
                                const std::vector<int>& gt_offsets, bool lower_better,
                                double threshold) {
  std::vector<char> used(static_cast<std::size_t>(n_gt), 0);
  std::vector<char> is_tp;
  is_tp.reserve(sorted.size());
  for (const auto& cand : sorted) {
    int best_gt = -1;
    double best = lower_better ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    for (const auto& [gt_local, affinity] : cand.affinities) {
      const int slot = gt_offsets[static_cast<std::size_t>(cand.scene)] + gt_local;
      if (used[static_cast<std::size_t>(slot)]) continue;
      if (lower_better ? affinity < best : affinity > best) {
        best = affinity;
        best_gt = slot;
      }
    }
    const bool tp = best_gt >= 0 && (lower_better ? best < threshold : best > threshold);
    if (tp) used[static_cast<std::size_t>(best_gt)] = 1;
    is_tp.push_back(tp ? 1 : 0);
  }

  const std::size_t k = is_tp.size();
  std::vector<double> precision(k), recall(k);
  int tp = 0;
  for (std::size_t i = 0; i < k; ++i) {
    tp += is_tp[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Monotone non-increasing envelope from the right.
  for (std::size_t i = k; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

inline void require_paired(const std::vector<GaussianMap>& preds, const std::vector<Scene>& gts) {
  if (preds.size() != gts.size())
    throw ShapeError("metrics: prediction and GT scene counts differ");
}

inline ApReport ap_from_candidates(std::array<std::vector<Candidate>, kNumClasses>& per_class,
                                   const std::array<int, kNumClasses>& gt_counts,
                                   const std::vector<int>& gt_offsets,
                                   const std::array<std::vector<double>, kNumClasses>& thresholds,
                                   bool lower_better) {
  ApReport report;
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (gt_counts[static_cast<std::size_t>(c)] == 0) continue;
    auto& cands = per_class[static_cast<std::size_t>(c)];
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.scene != b.scene) return a.scene < b.scene;
      return a.element < b.element;
    });
    ApPerClass entry;
    double class_sum = 0.0;
    for (double tau : thresholds[static_cast<std::size_t>(c)]) {
      const double ap = average_precision(cands, gt_counts[static_cast<std::size_t>(c)], gt_offsets,
                                          lower_better, tau);
      entry.by_threshold.emplace_back(tau, ap);
      class_sum += ap;
    }
    entry.mean = class_sum / static_cast<double>(thresholds[static_cast<std::size_t>(c)].size());
    report.per_class[static_cast<std::size_t>(c)] = entry;
    sum += entry.mean;
    ++present;
  }
  if (present > 0) report.mean = sum / present;
  return report;
}

}  // namespace detail

// Chamfer-distance average precision: predictions ranked by confidence across
// all scenes, greedily matched to the nearest unmatched same-scene GT, TP iff
// the distance is under the threshold. Per-class AP is the mean over the
// configured thresholds.
inline ApReport ap_chamfer(const std::vector<GaussianMap>& preds, const std::vector<Scene>& gts,
                           const EvalConfig& cfg = {}) {
  validate(cfg);
  detail::require_paired(preds, gts);

  std::array<int, kNumClasses> gt_counts{0, 0, 0};
  std::vector<int> gt_offsets(gts.size(), 0);
  std::array<std::vector<detail::Candidate>, kNumClasses> per_class;

  for (std::size_t s = 0; s < gts.size(); ++s) {
    gt_offsets[s] = (s == 0) ? 0 : gt_offsets[s - 1] + static_cast<int>(gts[s - 1].elements.size());
    for (const auto& e : gts[s].elements) gt_counts[static_cast<std::size_t>(static_cast<int>(e.class_id))]++;
  }

  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& scene = gts[s];
    for (std::size_t k = 0; k < preds[s].elements.size(); ++k) {
      const auto& e = preds[s].elements[k];
      detail::Candidate cand;
      cand.score = e.confidence();
      cand.scene = static_cast<int>(s);
      cand.element = static_cast<int>(k);
      const Polyline vec = vectorize(e);
      for (std::size_t j = 0; j < scene.elements.size(); ++j) {
        if (scene.elements[j].class_id != e.class_id) continue;
        cand.affinities.emplace_back(
            static_cast<int>(j),
            chamfer_distance(vec, scene.elements[j].vertices, cfg.chamfer_samples));
      }
      per_class[static_cast<std::size_t>(static_cast<int>(e.class_id))].push_back(std::move(cand));
    }
  }

  std::array<std::vector<double>, kNumClasses> thresholds;
  thresholds.fill(cfg.chamfer_thresholds);
  return detail::ap_from_candidates(per_class, gt_counts, gt_offsets, thresholds, true);
}

// IoU-based average precision with the same protocol; TP iff the hard IoU of
// the binarized rendered mask against the GT mask exceeds the threshold.
inline ApReport ap_raster(const std::vector<GaussianMap>& preds, const std::vector<Scene>& gts,
                          const EvalConfig& cfg = {}) {
  validate(cfg);
  detail::require_paired(preds, gts);

  std::array<int, kNumClasses> gt_counts{0, 0, 0};
  std::vector<int> gt_offsets(gts.size(), 0);
  std::array<std::vector<detail::Candidate>, kNumClasses> per_class;

  for (std::size_t s = 0; s < gts.size(); ++s) {
    gt_offsets[s] = (s == 0) ? 0 : gt_offsets[s - 1] + static_cast<int>(gts[s - 1].elements.size());
    for (const auto& e : gts[s].elements) gt_counts[static_cast<std::size_t>(static_cast<int>(e.class_id))]++;
  }

  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& scene = gts[s];
    for (std::size_t k = 0; k < preds[s].elements.size(); ++k) {
      const auto& e = preds[s].elements[k];
      detail::Candidate cand;
      cand.score = e.confidence();
      cand.scene = static_cast<int>(s);
      cand.element = static_cast<int>(k);
      const DensityMask mask = binarize(render_element(e, scene.grid, cfg.cutoff_sigmas), cfg.binarize_at);
      for (std::size_t j = 0; j < scene.elements.size(); ++j) {
        if (scene.elements[j].class_id != e.class_id) continue;
        cand.affinities.emplace_back(static_cast<int>(j),
                                     hard_iou(mask, scene.elements[j].mask, cfg.binarize_at));
      }
      per_class[static_cast<std::size_t>(static_cast<int>(e.class_id))].push_back(std::move(cand));
    }
  }

  return detail::ap_from_candidates(per_class, gt_counts, gt_offsets, cfg.iou_thresholds_by_class,
                                    false);
}

}  // namespace gsmap
