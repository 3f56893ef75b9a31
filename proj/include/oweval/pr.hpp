#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oweval/config.hpp"
#include "oweval/matching.hpp"

namespace oweval {

// One point of the cumulative precision-recall walk. `score` is the
// confidence of the entry that produced the point; cumulative counts include
// every ledger entry up to and including it.
struct PRPoint {
  double score = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ledger entry, ledger order
  std::int64_t total_gt = 0;
};

// Cumulative precision/recall per ledger entry. Recall uses total_gt as the
// denominator; an empty ledger yields an empty curve.
inline PRCurve pr_curve(const MatchLedger& ledger) {
  PRCurve curve;
  curve.total_gt = ledger.total_gt;
  curve.points.reserve(ledger.entries.size());
  std::int64_t tp = 0, fp = 0;
  for (const auto& e : ledger.entries) {
    if (e.is_tp) ++tp; else ++fp;
    PRPoint p;
    p.score = e.score;
    p.tp = tp;
    p.fp = fp;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = ledger.total_gt > 0
                   ? static_cast<double>(tp) / static_cast<double>(ledger.total_gt)
                   : 0.0;
    curve.points.push_back(p);
  }
  return curve;
}

namespace detail {

// Operating points are the score thresholds actually achievable: within a
// run of equal scores only the last cumulative point corresponds to some
// threshold, so tied groups collapse to their final point.
inline std::vector<const PRPoint*> operating_points(const PRCurve& curve) {
  std::vector<const PRPoint*> pts;
  const auto& p = curve.points;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i + 1 == p.size() || p[i + 1].score < p[i].score) {
      pts.push_back(&p[i]);
    }
  }
  return pts;
}

}  // namespace detail

// Reduces a curve to a single AP value in [0,1].
//
// auc_all_points: precision is made monotone by a right-to-left running
// maximum over the operating points, then AP is the sum of
// (recall step) x (interpolated precision) over distinct recall values.
//
// threshold_mean: the mean of the precision values at each threshold of the
// score grid. With distinct_scores the grid is the set of scores present;
// with uniform_grid, grid thresholds above the highest score have an empty
// denominator and are skipped.
//
// total_gt == 0 is defined as AP 0 (callers attach a report warning).
inline double average_precision(const PRCurve& curve, ApIntegration method,
                                std::int64_t total_gt,
                                const ScoreGrid& grid = ScoreGrid{}) {
  if (total_gt <= 0 || curve.points.empty()) return 0.0;
  const std::vector<const PRPoint*> pts = detail::operating_points(curve);

  if (method == ApIntegration::auc_all_points) {
    std::vector<double> interp(pts.size());
    double run_max = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
      run_max = std::max(run_max, pts[i]->precision);
      interp[i] = run_max;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i]->recall > prev_recall) {
        ap += (pts[i]->recall - prev_recall) * interp[i];
        prev_recall = pts[i]->recall;
      }
    }
    return ap;
  }

  // threshold_mean
  double sum = 0.0;
  std::int64_t n = 0;
  if (grid.kind == ScoreGrid::Kind::distinct_scores) {
    // Ascending threshold order for a fixed summation order.
    for (std::size_t i = pts.size(); i-- > 0;) {
      sum += pts[i]->precision;
      ++n;
    }
  } else {
    if (grid.step <= 0.0 || grid.step > 1.0) {
      throw ValidationError("uniform score grid step must be in (0,1]");
    }
    // The grid is k/steps for k = 0..steps, so common decimal steps land on
    // exact decimal thresholds instead of accumulating k*step drift.
    const int steps =
        std::max(1, static_cast<int>(std::llround(1.0 / grid.step)));
    for (int k = 0; k <= steps; ++k) {
      const double theta = static_cast<double>(k) / steps;
      // Last operating point with score >= theta carries the cumulative
      // counts over that score range.
      const PRPoint* at = nullptr;
      for (const PRPoint* p : pts) {
        if (p->score >= theta) at = p; else break;
      }
      if (at != nullptr) {
        sum += at->precision;
        ++n;
      }
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace oweval
