#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "oweval/matching.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

using namespace oweval;

namespace {

Detection det(std::int64_t image_id, double x, double y, double w, double h,
              double score, std::int64_t index, std::string label = "object") {
  Detection d;
  d.image_id = image_id;
  d.box = BBox::make(x, y, w, h);
  d.score = score;
  d.index = index;
  d.label = std::move(label);
  return d;
}

GroundTruthObject gt(std::int64_t image_id, double x, double y, double w,
                     double h, std::int64_t annotation_id,
                     std::optional<std::string> label = std::nullopt) {
  GroundTruthObject g;
  g.image_id = image_id;
  g.box = BBox::make(x, y, w, h);
  g.annotation_id = annotation_id;
  g.label = std::move(label);
  return g;
}

void check_one_to_one(const MatchLedger& ledger) {
  std::set<std::int64_t> targets;
  for (const auto& e : ledger.entries) {
    if (e.matched_target) {
      CHECK(targets.insert(*e.matched_target).second);
    }
  }
}

void check_sorted(const MatchLedger& ledger) {
  for (std::size_t i = 1; i < ledger.entries.size(); ++i) {
    const auto& a = ledger.entries[i - 1];
    const auto& b = ledger.entries[i];
    const bool ordered =
        a.score > b.score ||
        (a.score == b.score &&
         (a.image_id < b.image_id ||
          (a.image_id == b.image_id &&
           a.prediction_index < b.prediction_index)));
    CHECK(ordered);
  }
}

}  // namespace

TEST_CASE("cosine_similarity basics") {
  const std::vector<double> v = {0.3, -0.4, 0.5};
  CHECK(cosine_similarity(v, v) == Catch::Approx(1.0).margin(1e-12));
  CHECK(cosine_similarity(std::vector<double>{1, 0},
                          std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{1, 1},
                          std::vector<double>{1, 0}) ==
        Catch::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1, 0},
                                    std::vector<double>{1, 0, 0}),
                  EmbeddingError);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0},
                                    std::vector<double>{1, 0}),
                  EmbeddingError);
}

TEST_CASE("higher-scored duplicate claims the target, the other is FP") {
  const std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 10, 10, 1)};
  const std::vector<Detection> preds = {det(1, 0, 0, 10, 10, 0.8, 0),
                                        det(1, 1, 0, 10, 10, 0.9, 1)};
  const MatchLedger ledger = match_boxes(preds, targets, 0.5);
  REQUIRE(ledger.entries.size() == 2);
  CHECK(ledger.entries[0].score == 0.9);
  CHECK(ledger.entries[0].is_tp);
  CHECK(!ledger.entries[1].is_tp);
  CHECK(ledger.total_gt == 1);
}

TEST_CASE("no predictions yields an empty ledger with the GT count") {
  const std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 5, 5, 1),
                                                  gt(1, 10, 10, 5, 5, 2),
                                                  gt(1, 20, 20, 5, 5, 3)};
  const MatchLedger ledger = match_boxes({}, targets, 0.5);
  CHECK(ledger.entries.empty());
  CHECK(ledger.total_gt == 3);
}

TEST_CASE("greedy trace: overlapping middle prediction stays FP") {
  // Predictions .9 and .7 sit on distinct targets; .8 overlaps nothing.
  const std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 10, 10, 1),
                                                  gt(1, 30, 30, 10, 10, 2)};
  const std::vector<Detection> preds = {det(1, 0, 0, 10, 10, 0.9, 0),
                                        det(1, 60, 60, 5, 5, 0.8, 1),
                                        det(1, 30, 30, 10, 10, 0.7, 2)};
  const MatchLedger ledger = match_boxes(preds, targets, 0.5);
  REQUIRE(ledger.entries.size() == 3);
  CHECK(ledger.entries[0].is_tp);
  CHECK_FALSE(ledger.entries[1].is_tp);
  CHECK(ledger.entries[2].is_tp);

  // Same verdicts from the literal greedy trace.
  const auto flags = oracle::match_image(preds, targets, 0.5);
  CHECK(flags[0].tp);
  CHECK_FALSE(flags[1].tp);
  CHECK(flags[2].tp);
}

TEST_CASE("match_boxes rejects mixed image ids") {
  const std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 10, 10, 1)};
  const std::vector<Detection> preds = {det(2, 0, 0, 10, 10, 0.9, 0)};
  CHECK_THROWS_AS(match_boxes(preds, targets, 0.5), InputError);
}

TEST_CASE("equal-IoU ties go to the lowest annotation id") {
  const std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 10, 10, 7),
                                                  gt(1, 0, 0, 10, 10, 3)};
  const std::vector<Detection> preds = {det(1, 0, 0, 10, 10, 0.9, 0)};
  const MatchLedger ledger = match_boxes(preds, targets, 0.5);
  REQUIRE(ledger.entries.size() == 1);
  CHECK(ledger.entries[0].matched_target == 3);
}

TEST_CASE("dataset matching merges independent images deterministically") {
  std::vector<GroundTruthObject> targets = {gt(1, 0, 0, 10, 10, 1),
                                            gt(2, 5, 5, 8, 8, 2)};
  std::vector<Detection> preds = {det(1, 0, 0, 10, 10, 0.9, 0),
                                  det(2, 5, 5, 8, 8, 0.4, 1)};
  const MatchLedger ledger = match_dataset_boxes(preds, targets, 0.5);
  REQUIRE(ledger.entries.size() == 2);
  CHECK(ledger.total_gt == 2);
  CHECK(ledger.entries[0].is_tp);
  CHECK(ledger.entries[1].is_tp);

  // Reversed file order produces the identical ledger.
  std::reverse(preds.begin(), preds.end());
  std::reverse(targets.begin(), targets.end());
  const MatchLedger again = match_dataset_boxes(preds, targets, 0.5);
  REQUIRE(again.entries.size() == ledger.entries.size());
  for (std::size_t i = 0; i < ledger.entries.size(); ++i) {
    CHECK(again.entries[i].prediction_index ==
          ledger.entries[i].prediction_index);
    CHECK(again.entries[i].is_tp == ledger.entries[i].is_tp);
    CHECK(again.entries[i].matched_target == ledger.entries[i].matched_target);
  }
}

TEST_CASE("randomized scenes agree with the per-image oracle") {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 300; ++round) {
    testutil::SceneOptions opts;
    opts.integer_boxes = round % 2 == 0;
    opts.quantized_scores = round % 3 != 0;
    const testutil::Scene scene = testutil::random_scene(rng, opts);
    const double threshold = 0.3 + 0.1 * (round % 7);

    const MatchLedger ledger =
        match_dataset_boxes(scene.dets.records, scene.gt.objects, threshold);
    check_one_to_one(ledger);
    check_sorted(ledger);

    // Pool the oracle's per-image flags and compare TP multisets by score.
    std::map<std::int64_t, std::vector<Detection>> by_image;
    std::map<std::int64_t, std::vector<GroundTruthObject>> gt_by_image;
    for (const auto& d : scene.dets.records) by_image[d.image_id].push_back(d);
    for (const auto& g : scene.gt.objects) gt_by_image[g.image_id].push_back(g);
    std::multiset<std::pair<double, bool>> oracle_flags;
    for (const auto& [id, preds] : by_image) {
      for (const auto& f :
           oracle::match_image(preds, gt_by_image[id], threshold)) {
        oracle_flags.insert({f.score, f.tp});
      }
    }
    std::multiset<std::pair<double, bool>> engine_flags;
    for (const auto& e : ledger.entries) {
      engine_flags.insert({e.score, e.is_tp});
    }
    CHECK(engine_flags == oracle_flags);
  }
}

TEST_CASE("box matching ignores labels entirely") {
  std::mt19937_64 rng(5);
  testutil::SceneOptions opts;
  const testutil::Scene scene = testutil::random_scene(rng, opts);
  std::vector<Detection> relabeled = scene.dets.records;
  for (auto& d : relabeled) d.label = "zzz-" + std::to_string(rng() % 1000);
  const MatchLedger a =
      match_dataset_boxes(scene.dets.records, scene.gt.objects, 0.5);
  const MatchLedger b = match_dataset_boxes(relabeled, scene.gt.objects, 0.5);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].is_tp == b.entries[i].is_tp);
    CHECK(a.entries[i].matched_target == b.entries[i].matched_target);
  }
}

TEST_CASE("TP count never grows as the IoU threshold tightens") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 100; ++round) {
    const testutil::Scene scene = testutil::random_scene(rng);
    std::int64_t prev_tp = -1;
    bool first = true;
    for (double threshold : {0.3, 0.5, 0.7, 0.9}) {
      const MatchLedger ledger =
          match_dataset_boxes(scene.dets.records, scene.gt.objects, threshold);
      std::int64_t tp = 0;
      for (const auto& e : ledger.entries) {
        if (e.is_tp) ++tp;
      }
      if (!first) CHECK(tp <= prev_tp);
      prev_tp = tp;
      first = false;
    }
  }
}

TEST_CASE("label matching follows the one-to-one constraint") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  store.insert("sky", {0.0, 1.0});

  const std::vector<LabelPrediction> preds = {
      {"car", 0.9, 0, 1}, {"car", 0.8, 1, 1}};
  const std::vector<LabelTarget> targets = {{std::string("car"), 10}};
  const MatchLedger ledger = match_labels(preds, targets, store, 0.6);
  REQUIRE(ledger.entries.size() == 2);
  CHECK(ledger.entries[0].is_tp);      // score 0.9 claims the only target
  CHECK_FALSE(ledger.entries[1].is_tp);
  CHECK(ledger.total_gt == 1);
}

TEST_CASE("identical labels match at any threshold, orthogonal never") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  store.insert("sky", {0.0, 1.0});

  const std::vector<LabelPrediction> car = {{"car", 0.5, 0, 1}};
  const std::vector<LabelTarget> target_car = {{std::string("car"), 1}};
  const std::vector<LabelTarget> target_sky = {{std::string("sky"), 1}};
  CHECK(match_labels(car, target_car, store, 1.0).entries[0].is_tp);
  CHECK_FALSE(match_labels(car, target_sky, store, 0.1).entries[0].is_tp);
}

TEST_CASE("unlabeled targets are excluded from matching and the GT count") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  const std::vector<LabelPrediction> preds = {{"car", 0.9, 0, 1}};
  const std::vector<LabelTarget> targets = {{std::nullopt, 1},
                                            {std::string("car"), 2},
                                            {std::nullopt, 3}};
  const MatchLedger ledger = match_labels(preds, targets, store, 0.5);
  CHECK(ledger.total_gt == 1);
  CHECK(ledger.entries[0].is_tp);
  CHECK(ledger.entries[0].matched_target == 2);
}

TEST_CASE("missing embeddings are reported with the complete label list") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  const std::vector<LabelPrediction> preds = {{"broom", 0.9, 0, 1},
                                              {"faucet", 0.8, 1, 1}};
  const std::vector<LabelTarget> targets = {{std::string("car"), 1},
                                            {std::string("kite"), 2}};
  try {
    match_labels(preds, targets, store, 0.5);
    FAIL("expected MissingEmbeddingError");
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.labels() == std::vector<std::string>{"broom", "faucet", "kite"});
  }
}

TEST_CASE("label matching ignores boxes entirely") {
  std::mt19937_64 rng(42);
  const std::vector<std::string> vocab = {"car", "person", "dog", "chair"};
  testutil::SceneOptions opts;
  opts.vocabulary = vocab;
  const testutil::Scene scene = testutil::random_scene(rng, opts);
  const EmbeddingStore store = testutil::random_store(vocab, rng);

  auto snap_flags = [&](const std::vector<Detection>& dets) {
    std::map<std::int64_t, std::vector<LabelPrediction>> preds;
    std::map<std::int64_t, std::vector<LabelTarget>> targets;
    for (const auto& d : dets) {
      preds[d.image_id].push_back({d.label, d.score, d.index, d.image_id});
    }
    for (const auto& g : scene.gt.objects) {
      targets[g.image_id].push_back({g.label, g.annotation_id});
    }
    std::vector<std::pair<std::int64_t, bool>> flags;
    for (const auto& [id, p] : preds) {
      const MatchLedger ledger = match_labels(p, targets[id], store, 0.4);
      for (const auto& e : ledger.entries) {
        flags.emplace_back(e.prediction_index, e.is_tp);
      }
    }
    return flags;
  };

  std::vector<Detection> perturbed = scene.dets.records;
  for (auto& d : perturbed) d.box = testutil::random_box(rng, false);
  CHECK(snap_flags(scene.dets.records) == snap_flags(perturbed));
}
