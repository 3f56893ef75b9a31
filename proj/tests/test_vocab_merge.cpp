#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "oweval/vocab_merge.hpp"
#include "testutil.hpp"

using namespace oweval;

TEST_CASE("exact duplicate generated label is dropped at tau <= 1") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  const MergeResult r = merge_vocab({"car"}, {"car"}, store, 0.9);
  CHECK(r.merged == std::vector<std::string>{"car"});
  REQUIRE(r.dropped_generated.size() == 1);
  CHECK(r.dropped_generated[0].label == "car");
  CHECK(r.dropped_generated[0].nearest_user_label == "car");
  CHECK(r.dropped_generated[0].similarity == 1.0);
  CHECK(r.kept_generated.empty());
}

TEST_CASE("orthogonal generated label is kept") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  store.insert("broom", {0.0, 1.0});
  const MergeResult r = merge_vocab({"car"}, {"broom"}, store, 0.9);
  CHECK(r.merged == std::vector<std::string>{"car", "broom"});
  REQUIRE(r.kept_generated.size() == 1);
  CHECK(r.kept_generated[0].max_similarity == 0.0);
}

TEST_CASE("similarity exactly at tau drops the label") {
  const EmbeddingStore store = testutil::prescribed_store({"car", "auto"},
                                                          {0.75});
  // Use the value the engine actually computes so the equality case is hit
  // exactly, independent of rounding in the store construction.
  const double sim =
      cosine_similarity(*store.find("car"), *store.find("auto"));
  CHECK(sim == Catch::Approx(0.75).margin(1e-12));
  const MergeResult at_tau = merge_vocab({"car"}, {"auto"}, store, sim);
  CHECK(at_tau.kept_generated.empty());
  CHECK(at_tau.merged == std::vector<std::string>{"car"});
  const MergeResult above_tau =
      merge_vocab({"car"}, {"auto"}, store, sim + 1e-9);
  CHECK(above_tau.kept_generated.size() == 1);
}

TEST_CASE("tau above 1 keeps the whole generated set") {
  std::mt19937_64 rng(8);
  const std::vector<std::string> all = {"a", "b", "c", "d", "e"};
  const EmbeddingStore store = testutil::random_store(all, rng);
  const MergeResult r = merge_vocab({"a", "b"}, {"c", "d", "e", "a"}, store,
                                    1.01);
  // Set union: the regenerated "a" is kept by the filter but deduplicated.
  CHECK(r.merged == std::vector<std::string>{"a", "b", "c", "d", "e"});
  CHECK(r.kept_generated.size() == 4);
  CHECK(r.dropped_generated.empty());
}

TEST_CASE("empty user list keeps everything without needing embeddings") {
  EmbeddingStore store;  // deliberately empty
  const MergeResult r = merge_vocab({}, {"Car", "car", "dog"}, store, 0.9);
  CHECK(r.merged == std::vector<std::string>{"car", "dog"});
  CHECK(r.kept_generated.size() == 2);
  CHECK_FALSE(r.kept_generated[0].max_similarity.has_value());
}

TEST_CASE("labels are normalized and deduplicated before filtering") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  store.insert("dog", {0.0, 1.0});
  const MergeResult r =
      merge_vocab({" CAR ", "car"}, {"Dog", "  dog "}, store, 0.9);
  CHECK(r.merged == std::vector<std::string>{"car", "dog"});
  CHECK(r.kept_generated.size() == 1);
}

TEST_CASE("merge reports missing embeddings with the complete label list") {
  EmbeddingStore store;
  store.insert("car", {1.0, 0.0});
  try {
    merge_vocab({"car", "bike"}, {"kite"}, store, 0.9);
    FAIL("expected MissingEmbeddingError");
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.labels() == std::vector<std::string>{"bike", "kite"});
  }
}

TEST_CASE("merge properties hold over random vocabularies") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> pool;
    for (int i = 0; i < 12; ++i) pool.push_back("l" + std::to_string(i));
    const EmbeddingStore store = testutil::random_store(pool, rng, 4);

    std::vector<std::string> user, generated;
    for (const auto& l : pool) {
      if (rng() % 3 == 0) user.push_back(l);
      if (rng() % 2 == 0) generated.push_back(l + "");
    }
    const double tau1 = static_cast<double>(rng() % 100) / 100.0;
    const double tau2 = std::min(1.0, tau1 + 0.2);

    const MergeResult r1 = merge_vocab(user, generated, store, tau1);
    const MergeResult r2 = merge_vocab(user, generated, store, tau2);

    // Containment: user subset of merged subset of user + generated.
    const std::set<std::string> merged1(r1.merged.begin(), r1.merged.end());
    for (const auto& u : user) CHECK(merged1.count(u) == 1);
    std::set<std::string> universe(user.begin(), user.end());
    universe.insert(generated.begin(), generated.end());
    for (const auto& m : r1.merged) CHECK(universe.count(m) == 1);

    // Monotone in tau.
    const std::set<std::string> merged2(r2.merged.begin(), r2.merged.end());
    for (const auto& m : merged1) CHECK(merged2.count(m) == 1);

    // Every generated label is either kept or dropped, never both.
    CHECK(r1.kept_generated.size() + r1.dropped_generated.size() ==
          std::set<std::string>(generated.begin(), generated.end()).size());

    // Order independence: permuting the generated list preserves the
    // kept/dropped partition.
    std::vector<std::string> shuffled = generated;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const MergeResult rs = merge_vocab(user, shuffled, store, tau1);
    auto names = [](const std::vector<KeptLabel>& kept) {
      std::set<std::string> s;
      for (const auto& k : kept) s.insert(k.label);
      return s;
    };
    CHECK(names(rs.kept_generated) == names(r1.kept_generated));
  }
}
