#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oweval/errors.hpp"

namespace oweval {

// How a PR curve is reduced to one AP number.
//   auc_all_points: area under the interpolated precision-recall step curve.
//   threshold_mean: mean of the precision values over a score-threshold grid.
enum class ApIntegration { auc_all_points, threshold_mean };

inline std::string to_string(ApIntegration m) {
  return m == ApIntegration::auc_all_points ? "auc_all_points"
                                            : "threshold_mean";
}

// Score-threshold grid used by threshold_mean integration.
struct ScoreGrid {
  enum class Kind { distinct_scores, uniform_grid };
  Kind kind = Kind::distinct_scores;
  double step = 0.01;  // uniform_grid only
};

inline std::string to_string(const ScoreGrid& g) {
  if (g.kind == ScoreGrid::Kind::distinct_scores) return "distinct_scores";
  return "uniform_grid(" + std::to_string(g.step) + ")";
}

// Named partition of the configured threshold list into LO/MI/HI groups.
// Groups may be empty but must be disjoint and jointly cover the list.
struct IntervalMap {
  std::vector<double> lo;
  std::vector<double> mi;
  std::vector<double> hi;
};

// Score threshold at which point metrics (U-PRE/U-REC/U-F1) are reported.
struct OperatingPointRule {
  enum class Kind { best_f1, fixed_score };
  Kind kind = Kind::best_f1;
  double score = 0.0;  // fixed_score only
};

inline std::string to_string(const OperatingPointRule& r) {
  if (r.kind == OperatingPointRule::Kind::best_f1) return "best_f1";
  return "fixed_score(" + std::to_string(r.score) + ")";
}

struct EvalConfig {
  std::vector<double> iou_thresholds;  // for spatial matching, each in (0,1]
  std::vector<double> sim_thresholds;  // for label matching, each in [0,1]
  IntervalMap intervals;
  ApIntegration ap_integration = ApIntegration::auc_all_points;
  ScoreGrid score_grid;
  double unknown_iou = 0.5;
  OperatingPointRule unknown_operating_point;
};

namespace detail {

inline void check_threshold_list(const std::vector<double>& t,
                                 const std::string& name, double min_value,
                                 bool min_exclusive) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool below = min_exclusive ? t[i] <= min_value : t[i] < min_value;
    if (!std::isfinite(t[i]) || t[i] > 1.0 || below) {
      throw ValidationError(name + " threshold out of range: " +
                            std::to_string(t[i]));
    }
    if (i > 0 && t[i] <= t[i - 1]) {
      throw ValidationError(name +
                            " thresholds must be strictly increasing and "
                            "duplicate-free");
    }
  }
}

inline void check_partition(const std::vector<double>& thresholds,
                            const IntervalMap& m, const std::string& name) {
  std::vector<double> all = m.lo;
  all.insert(all.end(), m.mi.begin(), m.mi.end());
  all.insert(all.end(), m.hi.begin(), m.hi.end());
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError(name + " interval groups overlap");
  }
  std::vector<double> expect = thresholds;
  std::sort(expect.begin(), expect.end());
  if (sorted != expect) {
    throw ValidationError(name +
                          " interval groups do not cover the threshold list");
  }
}

}  // namespace detail

// Validates the IoU threshold list and its interval partition.
inline void validate_iou_config(const EvalConfig& cfg) {
  if (cfg.iou_thresholds.empty()) {
    throw ValidationError("iou threshold list is empty");
  }
  detail::check_threshold_list(cfg.iou_thresholds, "iou", 0.0, true);
  detail::check_partition(cfg.iou_thresholds, cfg.intervals, "iou");
}

// Validates the similarity threshold list and its interval partition.
inline void validate_sim_config(const EvalConfig& cfg) {
  if (cfg.sim_thresholds.empty()) {
    throw ValidationError("similarity threshold list is empty");
  }
  detail::check_threshold_list(cfg.sim_thresholds, "similarity", 0.0, false);
  detail::check_partition(cfg.sim_thresholds, cfg.intervals, "similarity");
}

// Splits a threshold list into LO/MI/HI by value. The boundaries reproduce
// the default CAAP ranges (LO 0.50-0.60, MI 0.65-0.80, HI 0.85-0.95) and the
// default SNAP ranges (LO 0.6, MI 0.7-0.8, HI 0.9), and give custom lists a
// deterministic placement.
inline IntervalMap intervals_by_value(const std::vector<double>& thresholds,
                                      double lo_upper, double mi_upper) {
  IntervalMap m;
  for (double t : thresholds) {
    if (t <= lo_upper) {
      m.lo.push_back(t);
    } else if (t <= mi_upper) {
      m.mi.push_back(t);
    } else {
      m.hi.push_back(t);
    }
  }
  return m;
}

inline IntervalMap caap_intervals_for(const std::vector<double>& thresholds) {
  return intervals_by_value(thresholds, 0.625, 0.825);
}

inline IntervalMap snap_intervals_for(const std::vector<double>& thresholds) {
  return intervals_by_value(thresholds, 0.65, 0.85);
}

// IoU thresholds 0.50..0.95 in 0.05 steps; LO={0.50,0.55,0.60},
// MI={0.65,0.70,0.75,0.80}, HI={0.85,0.90,0.95}.
inline EvalConfig default_caap_config() {
  EvalConfig cfg;
  for (int i = 0; i < 10; ++i) {
    cfg.iou_thresholds.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  }
  cfg.intervals = caap_intervals_for(cfg.iou_thresholds);
  return cfg;
}

// Similarity thresholds 0.6..0.9 in 0.1 steps; LO={0.6}, MI={0.7,0.8},
// HI={0.9}.
inline EvalConfig default_snap_config() {
  EvalConfig cfg;
  for (int i = 0; i < 4; ++i) {
    cfg.sim_thresholds.push_back(static_cast<double>(6 + i) / 10.0);
  }
  cfg.intervals = snap_intervals_for(cfg.sim_thresholds);
  return cfg;
}

// Single-threshold config for the unknown-object metric family.
inline EvalConfig default_unknown_config() {
  EvalConfig cfg;
  cfg.iou_thresholds = {0.5};
  cfg.intervals = caap_intervals_for(cfg.iou_thresholds);
  return cfg;
}

}  // namespace oweval
