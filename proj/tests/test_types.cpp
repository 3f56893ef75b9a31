#include <catch2/catch_amalgamated.hpp>

#include "oweval/config.hpp"
#include "oweval/types.hpp"

using namespace oweval;

TEST_CASE("normalize_label lowercases, trims and collapses whitespace") {
  CHECK(normalize_label("  Cardboard  Box ") == "cardboard box");
  CHECK(normalize_label("car") == "car");
  CHECK(normalize_label("Traffic\tLight") == "traffic light");
  CHECK(normalize_label("A\n B") == "a b");
}

TEST_CASE("normalize_label rejects blank input") {
  CHECK_THROWS_AS(normalize_label("   "), NormalizationError);
  CHECK_THROWS_AS(normalize_label(""), NormalizationError);
  CHECK_THROWS_AS(normalize_label("\t\n"), NormalizationError);
}

TEST_CASE("normalize_label is idempotent") {
  const std::vector<std::string> samples = {
      "  Cardboard  Box ", "CAR", "a  b   c", "x", " Mixed CASE  words "};
  for (const auto& s : samples) {
    const std::string once = normalize_label(s);
    CHECK(normalize_label(once) == once);
  }
}

TEST_CASE("BBox::make validates extents") {
  CHECK_NOTHROW(BBox::make(0, 0, 1, 1));
  CHECK_THROWS_AS(BBox::make(0, 0, 0, 1), ValidationError);
  CHECK_THROWS_AS(BBox::make(0, 0, 1, -2), ValidationError);
  CHECK_THROWS_AS(BBox::make(0, 0, std::nan(""), 1), ValidationError);
}

TEST_CASE("default CAAP config matches the reporting intervals") {
  const EvalConfig cfg = default_caap_config();
  REQUIRE(cfg.iou_thresholds.size() == 10);
  CHECK(cfg.iou_thresholds.front() == 0.50);
  CHECK(cfg.iou_thresholds.back() == 0.95);
  CHECK(cfg.intervals.lo == std::vector<double>{0.50, 0.55, 0.60});
  CHECK(cfg.intervals.mi == std::vector<double>{0.65, 0.70, 0.75, 0.80});
  CHECK(cfg.intervals.hi == std::vector<double>{0.85, 0.90, 0.95});
  CHECK(cfg.ap_integration == ApIntegration::auc_all_points);

  // LO, MI and HI partition the threshold list exactly.
  CHECK_NOTHROW(validate_iou_config(cfg));
  CHECK(cfg.intervals.lo.size() + cfg.intervals.mi.size() +
            cfg.intervals.hi.size() ==
        cfg.iou_thresholds.size());
}

TEST_CASE("default SNAP config covers 0.6..0.9 by 0.1") {
  const EvalConfig cfg = default_snap_config();
  CHECK(cfg.sim_thresholds == std::vector<double>{0.6, 0.7, 0.8, 0.9});
  CHECK(cfg.intervals.lo == std::vector<double>{0.6});
  CHECK(cfg.intervals.mi == std::vector<double>{0.7, 0.8});
  CHECK(cfg.intervals.hi == std::vector<double>{0.9});
  CHECK_NOTHROW(validate_sim_config(cfg));
}

TEST_CASE("config validation rejects unsorted or duplicated thresholds") {
  EvalConfig cfg = default_caap_config();
  cfg.iou_thresholds = {0.5, 0.5, 0.6};
  cfg.intervals = caap_intervals_for(cfg.iou_thresholds);
  CHECK_THROWS_AS(validate_iou_config(cfg), ValidationError);

  cfg.iou_thresholds = {0.6, 0.5};
  cfg.intervals = caap_intervals_for(cfg.iou_thresholds);
  CHECK_THROWS_AS(validate_iou_config(cfg), ValidationError);

  cfg = default_caap_config();
  cfg.intervals.lo.push_back(0.65);  // 0.65 now in LO and MI
  CHECK_THROWS_AS(validate_iou_config(cfg), ValidationError);

  cfg = default_caap_config();
  cfg.intervals.hi.pop_back();  // 0.95 uncovered
  CHECK_THROWS_AS(validate_iou_config(cfg), ValidationError);
}

TEST_CASE("embedding store enforces dimension and norm") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  CHECK(store.dimension() == 2);
  CHECK(store.contains("car"));
  CHECK_THROWS_AS(store.insert("bus", {1.0, 0.0, 0.0}), EmbeddingError);
  CHECK_THROWS_AS(store.insert("ghost", {0.0, 0.0}), EmbeddingError);

  EmbeddingStore other;
  other.insert("dog", {0.0, 1.0, 0.0});
  CHECK_THROWS_AS(store.merge(other), EmbeddingError);

  EmbeddingStore compatible;
  compatible.insert("dog", {0.0, 1.0});
  store.merge(compatible);
  CHECK(store.size() == 2);
}
