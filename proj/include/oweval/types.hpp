#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oweval/errors.hpp"

namespace oweval {

// Axis-aligned box, xywh pixel convention (x,y = top-left corner).
// Extents must be strictly positive; degenerate boxes are rejected at the
// ingestion boundary instead of being clamped.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  static BBox make(double x, double y, double w, double h) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
        !std::isfinite(h)) {
      throw ValidationError("bbox has non-finite coordinates");
    }
    if (w <= 0.0 || h <= 0.0) {
      throw ValidationError("bbox extents must be positive (w=" +
                            std::to_string(w) + ", h=" + std::to_string(h) +
                            ")");
    }
    return BBox{x, y, w, h};
  }

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

// One row of a detection file: a scored, free-form-labeled box.
// `index` is the 0-based position in the input file and is unique per file.
struct Detection {
  std::int64_t image_id = 0;
  BBox box;
  std::string label;  // normalized
  double score = 0.0;
  std::int64_t index = 0;
};

// One annotated target. `label` is absent for unlabeled/unknown annotations
// (the COCO-OOD convention).
struct GroundTruthObject {
  std::int64_t image_id = 0;
  BBox box;
  std::optional<std::string> label;  // normalized when present
  std::int64_t annotation_id = 0;
};

// Lowercase, trim, collapse internal whitespace runs to single spaces.
// Idempotent. Throws NormalizationError when nothing is left.
inline std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  if (out.empty()) {
    throw NormalizationError("label is empty after normalization: \"" +
                             std::string(raw) + "\"");
  }
  return out;
}

// A raw label alongside its normalized form.
struct Label {
  std::string raw;
  std::string normalized;

  static Label of(std::string_view raw) {
    return Label{std::string(raw), normalize_label(raw)};
  }
};

// Map from normalized label to a fixed-dimension real vector. All vectors
// share one dimension and have strictly positive Euclidean norm.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Inserts or replaces. The first insert fixes the dimension when the store
  // was default-constructed.
  void insert(const std::string& normalized_label, std::vector<double> vec) {
    if (dimension_ == 0) {
      dimension_ = vec.size();
    }
    if (vec.empty() || vec.size() != dimension_) {
      throw EmbeddingError("embedding for \"" + normalized_label +
                           "\" has dimension " + std::to_string(vec.size()) +
                           ", expected " + std::to_string(dimension_));
    }
    double sq = 0.0;
    for (double v : vec) {
      if (!std::isfinite(v)) {
        throw EmbeddingError("embedding for \"" + normalized_label +
                             "\" has non-finite components");
      }
      sq += v * v;
    }
    if (sq <= 0.0) {
      throw EmbeddingError("embedding for \"" + normalized_label +
                           "\" has zero norm");
    }
    entries_[normalized_label] = std::move(vec);
  }

  const std::vector<double>* find(const std::string& normalized_label) const {
    auto it = entries_.find(normalized_label);
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& normalized_label) const {
    return entries_.count(normalized_label) != 0;
  }

  // Merge another store in; dimensions must agree.
  void merge(const EmbeddingStore& other) {
    if (other.empty()) return;
    if (dimension_ != 0 && other.dimension_ != dimension_) {
      throw EmbeddingError("cannot merge embedding stores of dimension " +
                           std::to_string(other.dimension_) + " into " +
                           std::to_string(dimension_));
    }
    for (const auto& [label, vec] : other.entries_) {
      insert(label, vec);
    }
  }

  const std::map<std::string, std::vector<double>>& entries() const {
    return entries_;
  }

 private:
  std::size_t dimension_ = 0;
  std::map<std::string, std::vector<double>> entries_;
};

}  // namespace oweval
