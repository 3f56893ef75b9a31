#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oweval/dataset.hpp"
#include "oweval/metrics.hpp"
#include "oweval/types.hpp"

namespace oweval {

// Fixed 6-fractional-digit decimal formatting used everywhere a metric value
// is serialized. glibc prints the correctly rounded decimal of the exact
// binary value, which is the round-half-even contract.
inline std::string format_fixed6(double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return std::string(buf);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path);
  return ss.str();
}

// Write-all-or-nothing: the content lands in a sibling temp file first and
// is renamed over the destination only once fully written.
inline void atomic_write_file(const std::string& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::random_device rd;
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failure on " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path + ": " +
                  ec.message());
  }
}

namespace detail {

using json = nlohmann::json;

inline json config_to_json(const EvalConfig& cfg) {
  auto fixed_list = [](const std::vector<double>& v) {
    json arr = json::array();
    for (double t : v) arr.push_back(format_fixed6(t));
    return arr;
  };
  json j;
  j["ap_integration"] = to_string(cfg.ap_integration);
  j["iou_thresholds"] = fixed_list(cfg.iou_thresholds);
  j["sim_thresholds"] = fixed_list(cfg.sim_thresholds);
  j["intervals"] = {{"LO", fixed_list(cfg.intervals.lo)},
                    {"MI", fixed_list(cfg.intervals.mi)},
                    {"HI", fixed_list(cfg.intervals.hi)}};
  j["score_grid"] = to_string(cfg.score_grid);
  j["unknown_iou"] = format_fixed6(cfg.unknown_iou);
  j["unknown_operating_point"] = to_string(cfg.unknown_operating_point);
  return j;
}

inline json optional_fixed(const std::optional<double>& v) {
  if (!v) return nullptr;
  return format_fixed6(*v);
}

}  // namespace detail

// Byte-stable JSON rendering of a report: keys sorted, every real value
// formatted with six fractional digits, absent interval aggregates null.
inline std::string report_to_json_string(const MetricReport& report) {
  using detail::json;
  json thresholds = json::object();
  std::set<std::string> keys;
  for (const auto& [t, v] : report.values) {
    const std::string key = format_fixed6(t);
    if (!keys.insert(key).second) {
      throw ValidationError("threshold values collide at 6-digit precision: " +
                            key);
    }
    thresholds[key] = format_fixed6(v);
  }
  json j;
  j["metric"] = report.metric;
  j["method"] = report.method;
  j["thresholds"] = thresholds;
  j["intervals"] = {{"LO", detail::optional_fixed(report.lo)},
                    {"MI", detail::optional_fixed(report.mi)},
                    {"HI", detail::optional_fixed(report.hi)}};
  j["mean"] = format_fixed6(report.mean);
  j["counts"] = {{"n_images", report.counts.n_images},
                 {"n_predictions", report.counts.n_predictions},
                 {"n_gt", report.counts.n_gt}};
  j["warnings"] = report.warnings;
  j["config"] = detail::config_to_json(report.config);
  if (report.operating_point) {
    const auto& op = *report.operating_point;
    j["operating_point"] = {{"score", detail::optional_fixed(op.score)},
                            {"precision", format_fixed6(op.precision)},
                            {"recall", format_fixed6(op.recall)},
                            {"f1", format_fixed6(op.f1)}};
  }
  return j.dump(2) + "\n";
}

// CSV flattening: one key,value row per threshold, then the interval
// aggregates, the mean, and (for unknown reports) the operating point.
inline std::string report_to_csv_string(const MetricReport& report) {
  std::ostringstream out;
  auto opt = [](const std::optional<double>& v) {
    return v ? format_fixed6(*v) : std::string("n/a");
  };
  out << "metric,key,value\n";
  for (const auto& [t, v] : report.values) {
    out << report.metric << ',' << format_fixed6(t) << ',' << format_fixed6(v)
        << '\n';
  }
  out << report.metric << ",LO," << opt(report.lo) << '\n';
  out << report.metric << ",MI," << opt(report.mi) << '\n';
  out << report.metric << ",HI," << opt(report.hi) << '\n';
  out << report.metric << ",mean," << format_fixed6(report.mean) << '\n';
  if (report.operating_point) {
    const auto& op = *report.operating_point;
    out << report.metric << ",U-PRE," << format_fixed6(op.precision) << '\n';
    out << report.metric << ",U-REC," << format_fixed6(op.recall) << '\n';
    out << report.metric << ",U-F1," << format_fixed6(op.f1) << '\n';
    out << report.metric << ",operating_score," << opt(op.score) << '\n';
  }
  return out.str();
}

enum class ReportFormat { json, csv };

inline void write_report(const MetricReport& report, const std::string& path,
                         ReportFormat format = ReportFormat::json) {
  const std::string content = format == ReportFormat::json
                                  ? report_to_json_string(report)
                                  : report_to_csv_string(report);
  atomic_write_file(path, content);
}

namespace detail {

inline const json& require_key(const json& j, const char* key,
                               const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(ctx + ": missing required key \"" + key + "\"");
  }
  return *it;
}

inline std::int64_t require_int(const json& j, const char* key,
                                const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number_integer()) {
    throw ParseError(ctx + ": key \"" + key + "\" must be an integer");
  }
  return v.get<std::int64_t>();
}

inline double require_number(const json& j, const char* key,
                             const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number()) {
    throw ParseError(ctx + ": key \"" + key + "\" must be a number");
  }
  return v.get<double>();
}

inline std::string require_string(const json& j, const char* key,
                                  const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_string()) {
    throw ParseError(ctx + ": key \"" + key + "\" must be a string");
  }
  return v.get<std::string>();
}

struct RawBox {
  double x = 0, y = 0, w = 0, h = 0;
};

inline RawBox require_bbox(const json& j, const std::string& ctx) {
  const json& v = require_key(j, "bbox", ctx);
  if (!v.is_array() || v.size() != 4) {
    throw ParseError(ctx + ": \"bbox\" must be an array of 4 numbers");
  }
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw ParseError(ctx + ": \"bbox\" must contain only numbers");
    }
  }
  return RawBox{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                v[3].get<double>()};
}

inline json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace detail

struct GtLoadOptions {
  // Normalized category name whose annotations are treated as unlabeled
  // unknowns (in addition to annotations with unmapped category ids).
  std::optional<std::string> unknown_category;
};

// COCO-format ground truth: top-level "images", "annotations" (bbox as
// [x,y,w,h]) and "categories". Annotations whose category id is absent from
// "categories" get an absent label; iscrowd annotations are kept as ordinary
// ground truth and counted in a warning.
inline DatasetGT load_coco_gt(const std::string& path,
                              const GtLoadOptions& opts = {}) {
  using detail::json;
  const json root = detail::parse_json_file(path);
  if (!root.is_object()) {
    throw ParseError(path + ": top level must be a JSON object");
  }
  for (const char* key : {"images", "annotations", "categories"}) {
    const json& v = detail::require_key(root, key, path);
    if (!v.is_array()) {
      throw ParseError(path + ": \"" + key + "\" must be an array");
    }
  }

  DatasetGT gt;
  std::set<std::int64_t> image_ids;
  for (std::size_t i = 0; i < root["images"].size(); ++i) {
    const json& im = root["images"][i];
    const std::string ctx = path + ": images[" + std::to_string(i) + "]";
    if (!im.is_object()) throw ParseError(ctx + ": must be an object");
    ImageInfo info;
    info.id = detail::require_int(im, "id", ctx);
    if (!image_ids.insert(info.id).second) {
      throw ValidationError(path + ": duplicate image id " +
                            std::to_string(info.id));
    }
    if (im.contains("width") && im["width"].is_number_integer()) {
      info.width = im["width"].get<std::int64_t>();
    }
    if (im.contains("height") && im["height"].is_number_integer()) {
      info.height = im["height"].get<std::int64_t>();
    }
    if (im.contains("file_name") && im["file_name"].is_string()) {
      info.file_name = im["file_name"].get<std::string>();
    }
    gt.images.push_back(std::move(info));
  }

  for (std::size_t i = 0; i < root["categories"].size(); ++i) {
    const json& cat = root["categories"][i];
    const std::string ctx = path + ": categories[" + std::to_string(i) + "]";
    if (!cat.is_object()) throw ParseError(ctx + ": must be an object");
    const std::int64_t id = detail::require_int(cat, "id", ctx);
    const std::string name = detail::require_string(cat, "name", ctx);
    try {
      gt.categories[id] = normalize_label(name);
    } catch (const NormalizationError&) {
      throw ValidationError(path + ": category " + std::to_string(id) +
                            " has a blank name");
    }
  }

  std::vector<std::int64_t> bad_boxes;
  std::vector<std::int64_t> dangling;
  std::set<std::int64_t> annotation_ids;
  std::int64_t crowd_count = 0;
  for (std::size_t i = 0; i < root["annotations"].size(); ++i) {
    const json& ann = root["annotations"][i];
    const std::string ctx = path + ": annotations[" + std::to_string(i) + "]";
    if (!ann.is_object()) throw ParseError(ctx + ": must be an object");
    GroundTruthObject obj;
    obj.annotation_id = detail::require_int(ann, "id", ctx);
    obj.image_id = detail::require_int(ann, "image_id", ctx);
    if (!annotation_ids.insert(obj.annotation_id).second) {
      throw ValidationError(path + ": duplicate annotation id " +
                            std::to_string(obj.annotation_id));
    }
    const detail::RawBox rb = detail::require_bbox(ann, ctx);
    if (!(rb.w > 0.0) || !(rb.h > 0.0) || !std::isfinite(rb.x) ||
        !std::isfinite(rb.y) || !std::isfinite(rb.w) || !std::isfinite(rb.h)) {
      bad_boxes.push_back(obj.annotation_id);
      continue;
    }
    obj.box = BBox::make(rb.x, rb.y, rb.w, rb.h);
    if (image_ids.count(obj.image_id) == 0) {
      dangling.push_back(obj.annotation_id);
      continue;
    }
    if (ann.contains("category_id") && ann["category_id"].is_number_integer()) {
      auto it = gt.categories.find(ann["category_id"].get<std::int64_t>());
      if (it != gt.categories.end()) {
        if (!opts.unknown_category || it->second != *opts.unknown_category) {
          obj.label = it->second;
        }
      }
    }
    if (ann.contains("iscrowd") && ann["iscrowd"].is_number_integer() &&
        ann["iscrowd"].get<std::int64_t>() != 0) {
      ++crowd_count;
    }
    gt.objects.push_back(std::move(obj));
  }

  auto id_list = [](const std::vector<std::int64_t>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(ids[i]);
    }
    return s;
  };
  if (!bad_boxes.empty()) {
    throw ValidationError(path +
                          ": bbox extents must be positive; offending "
                          "annotation ids: " +
                          id_list(bad_boxes));
  }
  if (!dangling.empty()) {
    throw ValidationError(path +
                          ": annotations reference missing image ids; "
                          "offending annotation ids: " +
                          id_list(dangling));
  }
  if (crowd_count > 0) {
    gt.warnings.push_back(std::to_string(crowd_count) +
                          " iscrowd annotation(s) treated as ordinary "
                          "ground truth");
  }
  return gt;
}

struct DetectionLoadOptions {
  // Category map for records that carry "category_id" instead of "label".
  const std::map<std::int64_t, std::string>* categories = nullptr;
  // When set, records referencing other image ids are rejected (strict) or
  // dropped with a warning (lenient).
  const std::set<std::int64_t>* valid_image_ids = nullptr;
  bool lenient = false;
};

// Detection results: a JSON array of {"image_id", "bbox", "label", "score"}
// records ("category_id" plus a category map is accepted in place of
// "label"). Values are validated, never clamped; every rejection names the
// offending record.
inline DetectionFile load_detections(const std::string& path,
                                     const DetectionLoadOptions& opts = {}) {
  using detail::json;
  const json root = detail::parse_json_file(path);
  if (!root.is_array()) {
    throw ParseError(path + ": top level must be a JSON array");
  }

  DetectionFile out;
  std::vector<std::string> problems;
  std::int64_t next_index = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& rec = root[i];
    const std::string ctx = path + ": record " + std::to_string(i);
    if (!rec.is_object()) throw ParseError(ctx + ": must be an object");
    Detection d;
    d.image_id = detail::require_int(rec, "image_id", ctx);
    const detail::RawBox rb = detail::require_bbox(rec, ctx);
    const double score = detail::require_number(rec, "score", ctx);

    if (!(rb.w > 0.0) || !(rb.h > 0.0) || !std::isfinite(rb.x) ||
        !std::isfinite(rb.y) || !std::isfinite(rb.w) || !std::isfinite(rb.h)) {
      problems.push_back(ctx + ": bbox extents must be positive");
      continue;
    }
    if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
      problems.push_back(ctx + ": score " + std::to_string(score) +
                         " outside [0,1]");
      continue;
    }
    if (rec.contains("label")) {
      const std::string raw = detail::require_string(rec, "label", ctx);
      try {
        d.label = normalize_label(raw);
      } catch (const NormalizationError&) {
        problems.push_back(ctx + ": label is blank after normalization");
        continue;
      }
    } else if (rec.contains("category_id")) {
      if (opts.categories == nullptr) {
        problems.push_back(ctx +
                           ": has category_id but no category map was "
                           "provided");
        continue;
      }
      const std::int64_t cid = detail::require_int(rec, "category_id", ctx);
      auto it = opts.categories->find(cid);
      if (it == opts.categories->end()) {
        problems.push_back(ctx + ": unknown category_id " +
                           std::to_string(cid));
        continue;
      }
      d.label = it->second;
    } else {
      throw ParseError(ctx + ": needs either \"label\" or \"category_id\"");
    }
    if (opts.valid_image_ids != nullptr &&
        opts.valid_image_ids->count(d.image_id) == 0) {
      if (opts.lenient) {
        out.warnings.push_back(ctx + ": unknown image_id " +
                               std::to_string(d.image_id) + "; record dropped");
        continue;
      }
      problems.push_back(ctx + ": unknown image_id " +
                         std::to_string(d.image_id));
      continue;
    }
    d.box = BBox::make(rb.x, rb.y, rb.w, rb.h);
    d.score = score;
    d.index = next_index++;
    out.records.push_back(std::move(d));
  }
  if (!problems.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i) msg += "\n";
      msg += problems[i];
    }
    throw ValidationError(msg);
  }
  return out;
}

struct EmbeddingLoadResult {
  EmbeddingStore store;
  std::vector<std::string> warnings;
};

// JSON-Lines embeddings: one {"label": ..., "vector": [...]} object per
// line. All vectors must share one dimension; duplicate labels resolve to
// the last occurrence with a warning.
inline EmbeddingLoadResult load_embeddings(const std::string& path) {
  using detail::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  EmbeddingLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dimension = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string ctx = path + ": line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(ctx + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(ctx + ": must be a JSON object");
    const std::string raw = detail::require_string(j, "label", ctx);
    std::string label;
    try {
      label = normalize_label(raw);
    } catch (const NormalizationError&) {
      throw ValidationError(ctx + ": label is blank after normalization");
    }
    const json& vec = detail::require_key(j, "vector", ctx);
    if (!vec.is_array() || vec.empty()) {
      throw ParseError(ctx + ": \"vector\" must be a non-empty array");
    }
    std::vector<double> values;
    values.reserve(vec.size());
    for (const auto& e : vec) {
      if (!e.is_number()) {
        throw ParseError(ctx + ": \"vector\" must contain only numbers");
      }
      values.push_back(e.get<double>());
    }
    if (dimension == 0) {
      dimension = values.size();
    } else if (values.size() != dimension) {
      throw EmbeddingError(ctx + ": dimension " +
                           std::to_string(values.size()) + ", expected " +
                           std::to_string(dimension));
    }
    if (result.store.contains(label)) {
      result.warnings.push_back(ctx + ": duplicate label \"" + label +
                                "\"; last occurrence wins");
    }
    try {
      result.store.insert(label, std::move(values));
    } catch (const EmbeddingError& e) {
      throw EmbeddingError(ctx + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failure on " + path);
  return result;
}

// One label per line; blank lines are skipped, labels are normalized and
// deduplicated preserving first occurrence.
inline std::vector<std::string> load_label_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> labels;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string label = normalize_label(line);
    if (seen.insert(label).second) labels.push_back(label);
  }
  if (in.bad()) throw IoError("read failure on " + path);
  return labels;
}

// Detection records in the detection-file JSON contract, byte-stable.
inline std::string detections_to_json_string(
    const std::vector<Detection>& records) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Detection& d = records[i];
    out << (i ? ",\n " : "\n ");
    out << "{\"image_id\": " << d.image_id << ", \"bbox\": ["
        << format_fixed6(d.box.x) << ", " << format_fixed6(d.box.y) << ", "
        << format_fixed6(d.box.w) << ", " << format_fixed6(d.box.h)
        << "], \"label\": " << detail::json(d.label).dump()
        << ", \"score\": " << format_fixed6(d.score) << "}";
  }
  out << (records.empty() ? "]" : "\n]") << "\n";
  return out.str();
}

// Embedding store in the JSONL contract, one label per line, sorted.
inline std::string embeddings_to_jsonl_string(const EmbeddingStore& store) {
  std::ostringstream out;
  for (const auto& [label, vec] : store.entries()) {
    detail::json j;
    j["label"] = label;
    detail::json arr = detail::json::array();
    for (double v : vec) arr.push_back(v);
    j["vector"] = arr;
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace oweval
