#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oweval/geometry.hpp"
#include "oweval/types.hpp"

namespace oweval {

// Per-prediction TP/FP verdict at one matching threshold.
struct MatchEntry {
  std::int64_t prediction_index = 0;
  std::int64_t image_id = 0;
  double score = 0.0;
  bool is_tp = false;
  std::optional<std::int64_t> matched_target;  // annotation/target id
};

// Fixed record from which every PR curve is derived. Entries are sorted by
// (score desc, image_id asc, prediction index asc); each target id is
// claimed by at most one entry.
struct MatchLedger {
  std::vector<MatchEntry> entries;
  std::int64_t total_gt = 0;
};

namespace detail {

inline void sort_ledger(std::vector<MatchEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const MatchEntry& a, const MatchEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.image_id != b.image_id) return a.image_id < b.image_id;
              return a.prediction_index < b.prediction_index;
            });
}

}  // namespace detail

// Cosine similarity u.v / (|u||v|), in [-1,1]. Vectors must agree on
// dimension and have positive norm. Identical vectors yield exactly 1.
inline double cosine_similarity(std::span<const double> u,
                                std::span<const double> v) {
  if (u.size() != v.size() || u.empty()) {
    throw EmbeddingError("cosine similarity dimension mismatch: " +
                         std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  bool identical = true;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
    identical = identical && u[i] == v[i];
  }
  if (nu <= 0.0 || nv <= 0.0) {
    throw EmbeddingError("cosine similarity of zero-norm vector");
  }
  if (identical) return 1.0;
  const double value = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(value, -1.0, 1.0);
}

// Greedy class-agnostic matching within one image. Predictions are visited
// in (score desc, index asc) order; each claims the still-unmatched target
// with the highest IoU among those with IoU >= threshold, breaking IoU ties
// toward the lowest annotation_id. Labels play no part.
inline MatchLedger match_boxes(std::span<const Detection> predictions,
                               std::span<const GroundTruthObject> targets,
                               double iou_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold > 1.0) {
    throw InputError("iou threshold must be in (0,1], got " +
                     std::to_string(iou_threshold));
  }
  std::optional<std::int64_t> image_id;
  for (const auto& p : predictions) {
    if (image_id && p.image_id != *image_id) {
      throw InputError("match_boxes called with mixed image ids");
    }
    image_id = p.image_id;
  }
  for (const auto& t : targets) {
    if (image_id && t.image_id != *image_id) {
      throw InputError("match_boxes called with mixed image ids");
    }
    image_id = t.image_id;
  }

  std::vector<std::size_t> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a].score != predictions[b].score) {
      return predictions[a].score > predictions[b].score;
    }
    return predictions[a].index < predictions[b].index;
  });

  MatchLedger ledger;
  ledger.total_gt = static_cast<std::int64_t>(targets.size());
  ledger.entries.reserve(predictions.size());
  std::vector<bool> claimed(targets.size(), false);

  for (std::size_t pi : order) {
    const Detection& pred = predictions[pi];
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      if (claimed[ti]) continue;
      const double v = iou(pred.box, targets[ti].box);
      if (v < iou_threshold) continue;
      const bool better =
          !best || v > best_iou ||
          (v == best_iou &&
           targets[ti].annotation_id < targets[*best].annotation_id);
      if (better) {
        best = ti;
        best_iou = v;
      }
    }
    MatchEntry entry;
    entry.prediction_index = pred.index;
    entry.image_id = pred.image_id;
    entry.score = pred.score;
    if (best) {
      claimed[*best] = true;
      entry.is_tp = true;
      entry.matched_target = targets[*best].annotation_id;
    }
    ledger.entries.push_back(entry);
  }
  detail::sort_ledger(ledger.entries);
  return ledger;
}

// Dataset-level spatial matching: per-image greedy matching, merged into one
// globally sorted ledger. total_gt sums the per-image target counts.
inline MatchLedger match_dataset_boxes(
    std::span<const Detection> predictions,
    std::span<const GroundTruthObject> targets, double iou_threshold) {
  std::map<std::int64_t, std::vector<Detection>> preds_by_image;
  std::map<std::int64_t, std::vector<GroundTruthObject>> gt_by_image;
  for (const auto& p : predictions) preds_by_image[p.image_id].push_back(p);
  for (const auto& t : targets) gt_by_image[t.image_id].push_back(t);

  std::set<std::int64_t> image_ids;
  for (const auto& [id, _] : preds_by_image) image_ids.insert(id);
  for (const auto& [id, _] : gt_by_image) image_ids.insert(id);

  MatchLedger ledger;
  for (std::int64_t id : image_ids) {
    static const std::vector<Detection> no_preds;
    static const std::vector<GroundTruthObject> no_targets;
    auto pit = preds_by_image.find(id);
    auto git = gt_by_image.find(id);
    const auto& preds = pit == preds_by_image.end() ? no_preds : pit->second;
    const auto& gts = git == gt_by_image.end() ? no_targets : git->second;
    MatchLedger part = match_boxes(preds, gts, iou_threshold);
    ledger.total_gt += part.total_gt;
    ledger.entries.insert(ledger.entries.end(), part.entries.begin(),
                          part.entries.end());
  }
  detail::sort_ledger(ledger.entries);
  return ledger;
}

// A scored label prediction, detached from its box.
struct LabelPrediction {
  std::string label;  // normalized
  double score = 0.0;
  std::int64_t index = 0;
  std::int64_t image_id = 0;
};

// A target label for semantic matching. `target_id` must be unique across
// the ledger being built (annotation ids satisfy this).
struct LabelTarget {
  std::optional<std::string> label;  // absent: excluded from matching
  std::int64_t target_id = 0;
};

// Greedy semantic matching: predictions in (score desc, index asc) order
// claim the unmatched target with the highest cosine similarity among those
// >= sim_threshold, breaking ties toward the earliest target position.
// Targets with absent labels are excluded from matching and from total_gt.
// Boxes play no part. All labels involved must be present in the store.
inline MatchLedger match_labels(std::span<const LabelPrediction> predictions,
                                std::span<const LabelTarget> targets,
                                const EmbeddingStore& store,
                                double sim_threshold) {
  if (sim_threshold < 0.0 || sim_threshold > 1.0) {
    throw InputError("similarity threshold must be in [0,1], got " +
                     std::to_string(sim_threshold));
  }
  std::set<std::string> missing;
  for (const auto& p : predictions) {
    if (!store.contains(p.label)) missing.insert(p.label);
  }
  for (const auto& t : targets) {
    if (t.label && !store.contains(*t.label)) missing.insert(*t.label);
  }
  if (!missing.empty()) {
    throw MissingEmbeddingError(
        std::vector<std::string>(missing.begin(), missing.end()));
  }

  std::vector<std::size_t> usable;  // positions of labeled targets
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].label) usable.push_back(i);
  }

  std::vector<std::size_t> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a].score != predictions[b].score) {
      return predictions[a].score > predictions[b].score;
    }
    return predictions[a].index < predictions[b].index;
  });

  MatchLedger ledger;
  ledger.total_gt = static_cast<std::int64_t>(usable.size());
  ledger.entries.reserve(predictions.size());
  std::vector<bool> claimed(targets.size(), false);

  for (std::size_t pi : order) {
    const LabelPrediction& pred = predictions[pi];
    const std::vector<double>& pvec = *store.find(pred.label);
    std::optional<std::size_t> best;
    double best_sim = 0.0;
    for (std::size_t ti : usable) {
      if (claimed[ti]) continue;
      const double sim = cosine_similarity(pvec, *store.find(*targets[ti].label));
      if (sim < sim_threshold) continue;
      if (!best || sim > best_sim) {  // ties keep the earliest position
        best = ti;
        best_sim = sim;
      }
    }
    MatchEntry entry;
    entry.prediction_index = pred.index;
    entry.image_id = pred.image_id;
    entry.score = pred.score;
    if (best) {
      claimed[*best] = true;
      entry.is_tp = true;
      entry.matched_target = targets[*best].target_id;
    }
    ledger.entries.push_back(entry);
  }
  detail::sort_ledger(ledger.entries);
  return ledger;
}

}  // namespace oweval
