#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oweval/config.hpp"
#include "oweval/dataset.hpp"
#include "oweval/matching.hpp"
#include "oweval/pr.hpp"

namespace oweval {

struct ReportCounts {
  std::int64_t n_images = 0;
  std::int64_t n_predictions = 0;
  std::int64_t n_gt = 0;
};

// Point-metric block for the unknown-object family. `score` is the operating
// threshold actually used (absent when there are no predictions).
struct OperatingPointResult {
  std::optional<double> score;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Serialized output of one metric run: per-threshold values, LO/MI/HI
// interval means, the overall mean, counts and the config that produced it.
struct MetricReport {
  std::string metric;
  std::string method;
  std::vector<std::pair<double, double>> values;  // (threshold, value) asc
  std::optional<double> lo;  // absent when the group has no members
  std::optional<double> mi;
  std::optional<double> hi;
  double mean = 0.0;
  ReportCounts counts;
  EvalConfig config;
  std::vector<std::string> warnings;
  std::optional<OperatingPointResult> operating_point;
};

namespace detail {

inline double value_at(const std::vector<std::pair<double, double>>& values,
                       double threshold) {
  for (const auto& [t, v] : values) {
    if (t == threshold) return v;
  }
  throw InternalError("interval references unknown threshold " +
                      std::to_string(threshold));
}

inline std::optional<double> interval_mean(
    const std::vector<std::pair<double, double>>& values,
    const std::vector<double>& members) {
  if (members.empty()) return std::nullopt;
  double sum = 0.0;
  for (double t : members) sum += value_at(values, t);
  return sum / static_cast<double>(members.size());
}

inline void fill_aggregates(MetricReport& report) {
  report.lo = interval_mean(report.values, report.config.intervals.lo);
  report.mi = interval_mean(report.values, report.config.intervals.mi);
  report.hi = interval_mean(report.values, report.config.intervals.hi);
  double sum = 0.0;
  for (const auto& [t, v] : report.values) sum += v;
  report.mean = report.values.empty()
                    ? 0.0
                    : sum / static_cast<double>(report.values.size());
}

}  // namespace detail

// Class-agnostic AP over the configured IoU thresholds. Labels are ignored
// entirely; only spatial overlap drives matching.
inline MetricReport caap(const DatasetGT& gt, const DetectionFile& dets,
                         const EvalConfig& cfg) {
  validate_iou_config(cfg);
  MetricReport report;
  report.metric = "CAAP";
  report.method = to_string(cfg.ap_integration);
  report.config = cfg;
  report.counts.n_images = static_cast<std::int64_t>(gt.images.size());
  report.counts.n_predictions = static_cast<std::int64_t>(dets.records.size());
  report.counts.n_gt = static_cast<std::int64_t>(gt.objects.size());
  report.warnings = gt.warnings;
  report.warnings.insert(report.warnings.end(), dets.warnings.begin(),
                         dets.warnings.end());

  for (double threshold : cfg.iou_thresholds) {
    MatchLedger ledger = match_dataset_boxes(dets.records, gt.objects, threshold);
    PRCurve curve = pr_curve(ledger);
    const double ap = average_precision(curve, cfg.ap_integration,
                                        ledger.total_gt, cfg.score_grid);
    report.values.emplace_back(threshold, ap);
  }
  if (report.counts.n_gt == 0) {
    report.warnings.push_back("no ground truth objects; AP defined as 0");
  }
  detail::fill_aggregates(report);
  return report;
}

// Semantic naming AP over the configured similarity thresholds. Matching is
// per image and purely label-based; boxes are ignored. Ground truth objects
// without labels are excluded from matching and from N_GT.
inline MetricReport snap(const DatasetGT& gt, const DetectionFile& dets,
                         const EmbeddingStore& store, const EvalConfig& cfg) {
  validate_sim_config(cfg);

  std::map<std::int64_t, std::vector<LabelPrediction>> preds_by_image;
  std::map<std::int64_t, std::vector<LabelTarget>> targets_by_image;
  for (const auto& d : dets.records) {
    preds_by_image[d.image_id].push_back(
        LabelPrediction{d.label, d.score, d.index, d.image_id});
  }
  std::int64_t labeled_gt = 0;
  for (const auto& o : gt.objects) {
    targets_by_image[o.image_id].push_back(LabelTarget{o.label, o.annotation_id});
    if (o.label) ++labeled_gt;
  }
  if (labeled_gt == 0) {
    throw ValidationError("no labeled ground truth; SNAP is undefined");
  }

  // Surface every missing embedding up front, across all images.
  std::set<std::string> missing;
  for (const auto& d : dets.records) {
    if (!store.contains(d.label)) missing.insert(d.label);
  }
  for (const auto& o : gt.objects) {
    if (o.label && !store.contains(*o.label)) missing.insert(*o.label);
  }
  if (!missing.empty()) {
    throw MissingEmbeddingError(
        std::vector<std::string>(missing.begin(), missing.end()));
  }

  std::set<std::int64_t> image_ids;
  for (const auto& [id, _] : preds_by_image) image_ids.insert(id);
  for (const auto& [id, _] : targets_by_image) image_ids.insert(id);

  MetricReport report;
  report.metric = "SNAP";
  report.method = to_string(cfg.ap_integration);
  report.config = cfg;
  report.counts.n_images = static_cast<std::int64_t>(gt.images.size());
  report.counts.n_predictions = static_cast<std::int64_t>(dets.records.size());
  report.counts.n_gt = labeled_gt;
  report.warnings = gt.warnings;
  report.warnings.insert(report.warnings.end(), dets.warnings.begin(),
                         dets.warnings.end());

  static const std::vector<LabelPrediction> no_preds;
  static const std::vector<LabelTarget> no_targets;
  for (double threshold : cfg.sim_thresholds) {
    MatchLedger ledger;
    for (std::int64_t id : image_ids) {
      auto pit = preds_by_image.find(id);
      auto git = targets_by_image.find(id);
      const auto& preds = pit == preds_by_image.end() ? no_preds : pit->second;
      const auto& targets =
          git == targets_by_image.end() ? no_targets : git->second;
      MatchLedger part = match_labels(preds, targets, store, threshold);
      ledger.total_gt += part.total_gt;
      ledger.entries.insert(ledger.entries.end(), part.entries.begin(),
                            part.entries.end());
    }
    detail::sort_ledger(ledger.entries);
    PRCurve curve = pr_curve(ledger);
    const double ap = average_precision(curve, cfg.ap_integration,
                                        ledger.total_gt, cfg.score_grid);
    report.values.emplace_back(threshold, ap);
  }
  detail::fill_aggregates(report);
  return report;
}

// Unknown-object metric family: every ground truth object is treated as
// unknown and every prediction participates regardless of label. U-AP is the
// class-agnostic AP at the single configured IoU threshold (auc mode);
// U-PRE/U-REC/U-F1 are reported at the configured operating point.
inline MetricReport unknown_metrics(const DatasetGT& gt,
                                    const DetectionFile& dets,
                                    const EvalConfig& cfg) {
  if (cfg.unknown_iou <= 0.0 || cfg.unknown_iou > 1.0) {
    throw ValidationError("unknown_iou must be in (0,1]");
  }
  MetricReport report;
  report.metric = "UNKNOWN";
  report.method = to_string(ApIntegration::auc_all_points);
  report.config = cfg;
  report.config.iou_thresholds = {cfg.unknown_iou};
  report.config.intervals = caap_intervals_for(report.config.iou_thresholds);
  report.counts.n_images = static_cast<std::int64_t>(gt.images.size());
  report.counts.n_predictions = static_cast<std::int64_t>(dets.records.size());
  report.counts.n_gt = static_cast<std::int64_t>(gt.objects.size());
  report.warnings = gt.warnings;
  report.warnings.insert(report.warnings.end(), dets.warnings.begin(),
                         dets.warnings.end());

  MatchLedger ledger =
      match_dataset_boxes(dets.records, gt.objects, cfg.unknown_iou);
  PRCurve curve = pr_curve(ledger);
  const double uap = average_precision(curve, ApIntegration::auc_all_points,
                                       ledger.total_gt);
  report.values.emplace_back(cfg.unknown_iou, uap);
  if (report.counts.n_gt == 0) {
    report.warnings.push_back("no ground truth objects; AP defined as 0");
  }
  detail::fill_aggregates(report);

  OperatingPointResult op;
  const auto pts = detail::operating_points(curve);
  if (cfg.unknown_operating_point.kind == OperatingPointRule::Kind::best_f1) {
    // Scan achievable operating points for the best F1; ties prefer the
    // higher-recall (lower-threshold) point.
    for (const PRPoint* p : pts) {
      const double denom = p->precision + p->recall;
      const double f1 = denom > 0.0 ? 2.0 * p->precision * p->recall / denom : 0.0;
      if (!op.score || f1 > op.f1 || (f1 == op.f1 && p->recall > op.recall)) {
        op.score = p->score;
        op.precision = p->precision;
        op.recall = p->recall;
        op.f1 = f1;
      }
    }
  } else {
    const double theta = cfg.unknown_operating_point.score;
    const PRPoint* at = nullptr;
    for (const PRPoint* p : pts) {
      if (p->score >= theta) at = p; else break;
    }
    op.score = theta;
    if (at != nullptr) {
      op.precision = at->precision;
      op.recall = at->recall;
      const double denom = op.precision + op.recall;
      op.f1 = denom > 0.0 ? 2.0 * op.precision * op.recall / denom : 0.0;
    }
  }
  report.operating_point = op;
  return report;
}

}  // namespace oweval
