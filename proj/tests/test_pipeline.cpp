#include <catch2/catch_amalgamated.hpp>

#include "oweval/io.hpp"
#include "oweval/pipeline.hpp"
#include "testutil.hpp"

using namespace oweval;

namespace {

// Five deterministic fixture "images" (the mocks hash bytes, they never
// decode pixels).
void write_fixture_images(const testutil::TempDir& dir) {
  testutil::write_file(dir.file("a.png"), "\x89PNG-alpha-image-bytes");
  testutil::write_file(dir.file("b.png"), "\x89PNG-bravo-image-bytes");
  testutil::write_file(dir.file("c.jpg"), "\xFF\xD8\xFF-charlie-bytes");
  testutil::write_file(dir.file("d.png"), "\x89PNG-delta-image-bytes");
  testutil::write_file(dir.file("e.png"), "\x89PNG-echo-image-bytes");
  testutil::write_file(dir.file("notes.txt"), "not an image");
}

}  // namespace

TEST_CASE("pipeline output is byte-identical across runs and widths") {
  testutil::TempDir dir;
  write_fixture_images(dir);

  auto run_once = [&](int parallelism) {
    MockLabelGenerator generator;
    MockDetector detector;
    PipelineOptions options;
    options.parallelism = parallelism;
    options.deterministic_timing = true;
    const PipelineResult result =
        run_pipeline(dir.path().string(), generator, detector, options);
    return detections_to_json_string(result.detections) + "\x1e" +
           manifest_to_json_string(result, options);
  };

  const std::string first = run_once(1);
  CHECK(run_once(1) == first);
  CHECK(run_once(4) == first);
  CHECK(run_once(3) == first);
}

TEST_CASE("pipeline orders images lexicographically and skips non-images") {
  testutil::TempDir dir;
  write_fixture_images(dir);
  MockLabelGenerator generator;
  MockDetector detector;
  PipelineOptions options;
  options.deterministic_timing = true;
  const PipelineResult result =
      run_pipeline(dir.path().string(), generator, detector, options);
  REQUIRE(result.images.size() == 5);
  CHECK(result.images[0].name == "a.png");
  CHECK(result.images[4].name == "e.png");
  for (std::size_t i = 0; i < result.images.size(); ++i) {
    CHECK(result.images[i].image_id == static_cast<std::int64_t>(i) + 1);
  }
  // Detection indices are contiguous file positions.
  for (std::size_t i = 0; i < result.detections.size(); ++i) {
    CHECK(result.detections[i].index == static_cast<std::int64_t>(i));
  }
}

TEST_CASE("fail-soft pipeline records the failure and continues") {
  testutil::TempDir dir;
  write_fixture_images(dir);
  MockLabelGenerator generator;
  generator.fail_when_name_contains("c.jpg");
  MockDetector detector;
  PipelineOptions options;
  options.deterministic_timing = true;
  const PipelineResult result =
      run_pipeline(dir.path().string(), generator, detector, options);
  CHECK(result.failures == 1);
  CHECK(result.images[2].status == "error");
  CHECK(result.images[2].error.find("c.jpg") != std::string::npos);
  // The other four images still produced their detections.
  CHECK(result.images[0].status == "ok");
  const std::string manifest = manifest_to_json_string(result, options);
  CHECK(manifest.find("\"failures\": 1") != std::string::npos);
}

TEST_CASE("strict pipeline rethrows the first failure") {
  testutil::TempDir dir;
  write_fixture_images(dir);
  MockLabelGenerator generator;
  generator.fail_when_name_contains("d.png");
  MockDetector detector;
  PipelineOptions options;
  options.strict = true;
  options.deterministic_timing = true;
  CHECK_THROWS_AS(
      run_pipeline(dir.path().string(), generator, detector, options),
      ProviderError);
}

TEST_CASE("merge step queries the detector with the merged vocabulary") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("a.png"), "\x89PNG-merge-test");

  // Script the generator so the generated set is known.
  MockLabelGenerator generator;
  generator.script_prompt(kDefaultPrompt, "person\ncar");

  // Detector that records the query it receives.
  struct Recording : Detector {
    std::vector<RawDetection> run_detection(const std::string&,
                                            const std::vector<std::string>& ls,
                                            int* attempts) override {
      if (attempts) *attempts = 1;
      queries.push_back(ls);
      return {};
    }
    std::vector<std::vector<std::string>> queries;
  } detector;

  MockEmbedder embedder(16);
  PipelineOptions options;
  options.deterministic_timing = true;
  options.merge_user_labels = std::vector<std::string>{"person"};
  options.merge_tau = 0.9;
  options.embedder = &embedder;

  const PipelineResult result =
      run_pipeline(dir.path().string(), generator, detector, options);
  REQUIRE(result.images.size() == 1);
  REQUIRE(detector.queries.size() == 1);
  // "person" is redundant against the user list (similarity 1), "car" stays.
  CHECK(detector.queries[0] == std::vector<std::string>{"person", "car"});
  REQUIRE(result.images[0].merged_labels.has_value());
  CHECK(*result.images[0].merged_labels ==
        std::vector<std::string>{"person", "car"});
  const std::string manifest = manifest_to_json_string(result, options);
  CHECK(manifest.find("merged_labels") != std::string::npos);
}

TEST_CASE("empty label reply skips the detector call") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("a.png"), "\x89PNG-empty-reply");
  MockLabelGenerator generator;
  generator.script_prompt(kDefaultPrompt, "");
  struct Exploding : Detector {
    std::vector<RawDetection> run_detection(const std::string&,
                                            const std::vector<std::string>&,
                                            int*) override {
      throw std::logic_error("must not be called");
    }
  } detector;
  PipelineOptions options;
  options.deterministic_timing = true;
  const PipelineResult result =
      run_pipeline(dir.path().string(), generator, detector, options);
  CHECK(result.failures == 0);
  CHECK(result.detections.empty());
  CHECK(result.images[0].detector_attempts == 0);
  REQUIRE(result.images[0].warnings.size() == 1);
}
