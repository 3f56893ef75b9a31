#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "oweval/io.hpp"
#include "oweval/providers.hpp"
#include "oweval/vocab_merge.hpp"

namespace oweval {

struct PipelineOptions {
  PromptTemplate prompt;
  int parallelism = 1;
  bool strict = false;
  // When set, generated labels are merged with these user labels before
  // detection; requires `embedder`.
  std::optional<std::vector<std::string>> merge_user_labels;
  double merge_tau = 0.9;
  Embedder* embedder = nullptr;
  // Mock providers answer instantly by definition; recording zero durations
  // keeps their manifests byte-stable across runs.
  bool deterministic_timing = false;
  // Free-form provider descriptions echoed into the manifest.
  std::string generator_desc = "mock";
  std::string detector_desc = "mock";
};

struct ImageRunRecord {
  std::string name;
  std::int64_t image_id = 0;
  std::vector<std::string> labels;                         // generated (C_g)
  std::optional<std::vector<std::string>> merged_labels;   // when merging
  std::string status = "ok";  // "ok" | "error"
  std::string error;
  int generator_attempts = 0;
  int detector_attempts = 0;
  std::int64_t duration_ms = 0;
  std::vector<std::string> warnings;
  std::int64_t n_detections = 0;
};

struct PipelineResult {
  std::vector<Detection> detections;  // file order, indices 0..n-1
  std::vector<ImageRunRecord> images;
  std::int64_t failures = 0;
};

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  static const std::set<std::string> kKnown = {".jpg", ".jpeg", ".png",
                                               ".bmp", ".gif",  ".webp"};
  return kKnown.count(ext) != 0;
}

}  // namespace detail

// Lists the image files of a directory in lexicographic filename order; this
// order defines the image ids (1-based) used in the outputs.
inline std::vector<std::filesystem::path> list_image_files(
    const std::string& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) {
    throw IoError(directory + " is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && detail::has_image_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  return files;
}

// Per image: generate labels, optionally merge with user labels, detect.
// Images are processed with bounded parallelism; outputs are assembled in
// image order so results are independent of scheduling. Per-image failures
// are recorded and skipped unless `strict`, in which case the first failure
// is rethrown after all workers finish.
inline PipelineResult run_pipeline(const std::string& image_directory,
                                   LabelGenerator& generator,
                                   Detector& detector,
                                   const PipelineOptions& options) {
  if (options.parallelism < 1) {
    throw InputError("parallelism must be >= 1");
  }
  if (options.merge_user_labels && options.embedder == nullptr) {
    throw InputError("vocabulary merging requires an embedder");
  }
  const std::vector<std::filesystem::path> files =
      list_image_files(image_directory);

  EmbeddingStore user_store;
  if (options.merge_user_labels) {
    user_store = embed_labels(*options.merge_user_labels, *options.embedder);
  }

  PipelineResult result;
  result.images.resize(files.size());
  std::vector<std::vector<Detection>> per_image(files.size());

  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= files.size()) return;
      ImageRunRecord& rec = result.images[i];
      rec.name = files[i].filename().string();
      rec.image_id = static_cast<std::int64_t>(i) + 1;
      const auto start = std::chrono::steady_clock::now();
      try {
        const std::string bytes = read_text_file(files[i].string());
        rec.labels = generate_labels(rec.name, bytes, options.prompt,
                                     generator, &rec.warnings,
                                     &rec.generator_attempts);
        std::vector<std::string> query = rec.labels;
        if (options.merge_user_labels) {
          EmbeddingStore store = user_store;
          store.merge(embed_labels(rec.labels, *options.embedder));
          const MergeResult merged =
              merge_vocab(*options.merge_user_labels, rec.labels, store,
                          options.merge_tau);
          query = merged.merged;
          rec.merged_labels = merged.merged;
        }
        per_image[i] = detect(bytes, query, detector, rec.image_id,
                              &rec.warnings, &rec.detector_attempts);
        rec.n_detections = static_cast<std::int64_t>(per_image[i].size());
      } catch (const std::exception& e) {
        rec.status = "error";
        rec.error = e.what();
      }
      if (!options.deterministic_timing) {
        rec.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      }
    }
  };

  if (options.parallelism == 1 || files.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    const int width =
        std::min<std::size_t>(options.parallelism, files.size());
    threads.reserve(width);
    for (int t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (const auto& rec : result.images) {
    if (rec.status != "ok") ++result.failures;
  }
  if (options.strict && result.failures > 0) {
    for (const auto& rec : result.images) {
      if (rec.status != "ok") {
        throw ProviderError("pipeline failed on " + rec.name + ": " +
                            rec.error);
      }
    }
  }

  std::int64_t index = 0;
  for (auto& dets : per_image) {
    for (auto& d : dets) {
      d.index = index++;
      result.detections.push_back(std::move(d));
    }
  }
  return result;
}

// Manifest JSON: per-image label lists, status, attempts, durations and
// warnings, plus run-level config echo and totals. Byte-stable for
// deterministic providers.
inline std::string manifest_to_json_string(const PipelineResult& result,
                                           const PipelineOptions& options) {
  using nlohmann::json;
  json images = json::object();
  for (const auto& rec : result.images) {
    json j;
    j["image_id"] = rec.image_id;
    j["labels"] = rec.labels;
    if (options.merge_user_labels) {
      j["merged_labels"] =
          rec.merged_labels ? json(*rec.merged_labels) : json(nullptr);
    }
    j["status"] = rec.status;
    if (!rec.error.empty()) j["error"] = rec.error;
    j["attempts"] = {{"generator", rec.generator_attempts},
                     {"detector", rec.detector_attempts}};
    j["duration_ms"] = rec.duration_ms;
    j["detections"] = rec.n_detections;
    j["warnings"] = rec.warnings;
    images[rec.name] = std::move(j);
  }
  json config;
  config["prompt"] = options.prompt.text;
  config["generator"] = options.generator_desc;
  config["detector"] = options.detector_desc;
  config["merge"] = options.merge_user_labels.has_value();
  if (options.merge_user_labels) {
    config["tau"] = format_fixed6(options.merge_tau);
    config["user_labels"] = *options.merge_user_labels;
  }
  json root;
  root["config"] = std::move(config);
  root["images"] = std::move(images);
  root["totals"] = {
      {"images", result.images.size()},
      {"detections", result.detections.size()},
      {"failures", result.failures}};
  return root.dump(2) + "\n";
}

}  // namespace oweval
