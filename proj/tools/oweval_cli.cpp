// Command-line front end: evaluation, vocabulary merging, embedding fetch
// and pipeline orchestration over the file contracts in oweval/io.hpp.
//
// Exit codes: 0 success, 1 validation/parse error, 2 provider error,
// 3 internal invariant violation.

#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oweval/oweval.hpp"

namespace {

using namespace oweval;

std::vector<double> parse_double_list(const std::string& csv,
                                      const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(flag + ": cannot parse \"" + item +
                            "\" as a number");
    }
  }
  if (out.empty()) throw ValidationError(flag + ": empty list");
  return out;
}

ApIntegration parse_method(const std::string& s) {
  if (s == "auc") return ApIntegration::auc_all_points;
  if (s == "tmean") return ApIntegration::threshold_mean;
  throw ValidationError("--method must be auc or tmean, got \"" + s + "\"");
}

OperatingPointRule parse_operating_point(const std::string& s) {
  OperatingPointRule rule;
  if (s == "best-f1") return rule;
  if (s.rfind("score:", 0) == 0) {
    rule.kind = OperatingPointRule::Kind::fixed_score;
    try {
      rule.score = std::stod(s.substr(6));
    } catch (const std::exception&) {
      throw ValidationError("--operating-point: cannot parse \"" + s + "\"");
    }
    if (rule.score < 0.0 || rule.score > 1.0) {
      throw ValidationError("--operating-point score must be in [0,1]");
    }
    return rule;
  }
  throw ValidationError(
      "--operating-point must be best-f1 or score:<value>, got \"" + s + "\"");
}

ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw ValidationError("--format must be json or csv, got \"" + s + "\"");
}

std::string opt6(const std::optional<double>& v) {
  return v ? format_fixed6(*v) : std::string("n/a");
}

struct GtFlags {
  std::string gt_path;
  std::string unknown_category;
  bool lenient = false;
};

void add_gt_flags(CLI::App* cmd, GtFlags& flags) {
  cmd->add_option("--gt", flags.gt_path, "ground truth file (COCO JSON)")
      ->required();
  cmd->add_option("--unknown-category", flags.unknown_category,
                  "category name treated as unlabeled/unknown");
  cmd->add_flag("--lenient", flags.lenient,
                "drop detections with unknown image ids instead of failing");
}

DatasetGT load_gt(const GtFlags& flags) {
  GtLoadOptions opts;
  if (!flags.unknown_category.empty()) {
    opts.unknown_category = normalize_label(flags.unknown_category);
  }
  return load_coco_gt(flags.gt_path, opts);
}

DetectionFile load_dets(const std::string& path, const DatasetGT& gt,
                        bool lenient) {
  std::set<std::int64_t> image_ids;
  for (const auto& im : gt.images) image_ids.insert(im.id);
  DetectionLoadOptions opts;
  opts.categories = &gt.categories;
  opts.valid_image_ids = &image_ids;
  opts.lenient = lenient;
  return load_detections(path, opts);
}

void print_interval_summary(const MetricReport& r) {
  std::cout << r.metric << " mean=" << format_fixed6(r.mean)
            << " LO=" << opt6(r.lo) << " MI=" << opt6(r.mi)
            << " HI=" << opt6(r.hi) << "\n";
}

int run_guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const ProviderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free open-world detection evaluation toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  // ---- eval-caap ----------------------------------------------------------
  auto* caap_cmd = app.add_subcommand(
      "eval-caap", "Class-agnostic AP over IoU thresholds");
  {
    static GtFlags gt_flags;
    static std::string dets_path, iou_list, method = "auc", out_path,
                       format = "json", score_grid = "distinct";
    static double grid_step = 0.01;
    add_gt_flags(caap_cmd, gt_flags);
    caap_cmd->add_option("--dets", dets_path, "detection file")->required();
    caap_cmd->add_option("--iou-list", iou_list,
                         "comma-separated IoU thresholds");
    caap_cmd->add_option("--method", method, "auc|tmean");
    caap_cmd->add_option("--score-grid", score_grid,
                         "distinct|uniform (tmean only)");
    caap_cmd->add_option("--grid-step", grid_step, "uniform grid step");
    caap_cmd->add_option("--out", out_path, "report output path")->required();
    caap_cmd->add_option("--format", format, "json|csv");
    caap_cmd->callback([&] {
      action = [&] {
        EvalConfig cfg = default_caap_config();
        if (!iou_list.empty()) {
          cfg.iou_thresholds = parse_double_list(iou_list, "--iou-list");
          cfg.intervals = caap_intervals_for(cfg.iou_thresholds);
        }
        cfg.ap_integration = parse_method(method);
        if (score_grid == "uniform") {
          cfg.score_grid.kind = ScoreGrid::Kind::uniform_grid;
          cfg.score_grid.step = grid_step;
        } else if (score_grid != "distinct") {
          throw ValidationError("--score-grid must be distinct or uniform");
        }
        const DatasetGT gt = load_gt(gt_flags);
        const DetectionFile dets =
            load_dets(dets_path, gt, gt_flags.lenient);
        const MetricReport report = caap(gt, dets, cfg);
        write_report(report, out_path, parse_format(format));
        print_interval_summary(report);
      };
    });
  }

  // ---- eval-snap ----------------------------------------------------------
  auto* snap_cmd = app.add_subcommand(
      "eval-snap", "Semantic naming AP over similarity thresholds");
  {
    static GtFlags gt_flags;
    static std::string dets_path, emb_path, sim_list, method = "auc",
                       out_path, format = "json";
    add_gt_flags(snap_cmd, gt_flags);
    snap_cmd->add_option("--dets", dets_path, "detection file")->required();
    snap_cmd->add_option("--embeddings", emb_path, "embeddings JSONL")
        ->required();
    snap_cmd->add_option("--sim-list", sim_list,
                         "comma-separated similarity thresholds");
    snap_cmd->add_option("--method", method, "auc|tmean");
    snap_cmd->add_option("--out", out_path, "report output path")->required();
    snap_cmd->add_option("--format", format, "json|csv");
    snap_cmd->callback([&] {
      action = [&] {
        EvalConfig cfg = default_snap_config();
        if (!sim_list.empty()) {
          cfg.sim_thresholds = parse_double_list(sim_list, "--sim-list");
          cfg.intervals = snap_intervals_for(cfg.sim_thresholds);
        }
        cfg.ap_integration = parse_method(method);
        const DatasetGT gt = load_gt(gt_flags);
        const DetectionFile dets =
            load_dets(dets_path, gt, gt_flags.lenient);
        const EmbeddingLoadResult emb = load_embeddings(emb_path);
        MetricReport report = snap(gt, dets, emb.store, cfg);
        report.warnings.insert(report.warnings.end(), emb.warnings.begin(),
                               emb.warnings.end());
        write_report(report, out_path, parse_format(format));
        print_interval_summary(report);
      };
    });
  }

  // ---- eval-unknown -------------------------------------------------------
  auto* unk_cmd = app.add_subcommand(
      "eval-unknown", "Unknown-object AP, precision, recall and F1");
  {
    static GtFlags gt_flags;
    static std::string dets_path, operating = "best-f1", out_path,
                       format = "json";
    static double iou = 0.5;
    add_gt_flags(unk_cmd, gt_flags);
    unk_cmd->add_option("--dets", dets_path, "detection file")->required();
    unk_cmd->add_option("--iou", iou, "IoU threshold (default 0.5)");
    unk_cmd->add_option("--operating-point", operating,
                        "best-f1|score:<value>");
    unk_cmd->add_option("--out", out_path, "report output path")->required();
    unk_cmd->add_option("--format", format, "json|csv");
    unk_cmd->callback([&] {
      action = [&] {
        EvalConfig cfg = default_unknown_config();
        cfg.unknown_iou = iou;
        cfg.unknown_operating_point = parse_operating_point(operating);
        const DatasetGT gt = load_gt(gt_flags);
        const DetectionFile dets =
            load_dets(dets_path, gt, gt_flags.lenient);
        const MetricReport report = unknown_metrics(gt, dets, cfg);
        write_report(report, out_path, parse_format(format));
        const auto& op = *report.operating_point;
        std::cout << "UNKNOWN U-AP=" << format_fixed6(report.mean)
                  << " U-PRE=" << format_fixed6(op.precision)
                  << " U-REC=" << format_fixed6(op.recall)
                  << " U-F1=" << format_fixed6(op.f1) << "\n";
      };
    });
  }

  // ---- merge-vocab --------------------------------------------------------
  auto* merge_cmd = app.add_subcommand(
      "merge-vocab", "Merge user labels with generated labels");
  {
    static std::string user_path, gen_path, emb_path, out_path;
    static double tau = 0.9;
    merge_cmd->add_option("--user", user_path, "user labels, one per line")
        ->required();
    merge_cmd
        ->add_option("--generated", gen_path, "generated labels, one per line")
        ->required();
    merge_cmd->add_option("--embeddings", emb_path, "embeddings JSONL")
        ->required();
    merge_cmd->add_option("--tau", tau, "redundancy threshold (default 0.9)");
    merge_cmd->add_option("--out", out_path, "merged labels output path")
        ->required();
    merge_cmd->callback([&] {
      action = [&] {
        const std::vector<std::string> user = load_label_lines(user_path);
        const std::vector<std::string> gen = load_label_lines(gen_path);
        const EmbeddingLoadResult emb = load_embeddings(emb_path);
        const MergeResult result = merge_vocab(user, gen, emb.store, tau);
        std::string content;
        for (const auto& l : result.merged) content += l + "\n";
        atomic_write_file(out_path, content);
        std::cout << "MERGE user=" << user.size()
                  << " generated=" << gen.size()
                  << " kept=" << result.kept_generated.size()
                  << " dropped=" << result.dropped_generated.size()
                  << " merged=" << result.merged.size() << "\n";
      };
    });
  }

  // ---- pipeline-run -------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand(
      "pipeline-run", "Generate labels per image and detect them");
  {
    static std::string images_dir, prompt, llm_endpoint, det_endpoint,
        llm_model, det_model, embed_endpoint, embed_model, user_path,
        out_path, manifest_path, llm_auth_env, det_auth_env, embed_auth_env,
        mock_fail;
    static bool mock = false, strict = false, merge = false;
    static double tau = 0.9, timeout_s = 60.0;
    static int parallel = 1, retries = 2, mock_dim = 16;
    pipe_cmd->add_option("--images", images_dir, "image directory")
        ->required();
    pipe_cmd->add_option("--prompt", prompt,
                         "label-generation prompt (default: \"" +
                             std::string(kDefaultPrompt) + "\")");
    pipe_cmd->add_flag("--mock", mock, "use deterministic mock providers");
    pipe_cmd->add_option("--llm-endpoint", llm_endpoint,
                         "chat-completions endpoint for label generation");
    pipe_cmd->add_option("--detector-endpoint", det_endpoint,
                         "detector endpoint");
    pipe_cmd->add_option("--llm-model", llm_model, "label generator model");
    pipe_cmd->add_option("--detector-model", det_model, "detector model");
    pipe_cmd->add_option("--llm-auth-env", llm_auth_env,
                         "env var with the LLM bearer token");
    pipe_cmd->add_option("--detector-auth-env", det_auth_env,
                         "env var with the detector bearer token");
    pipe_cmd->add_flag("--merge", merge,
                       "merge user labels into the detector query");
    pipe_cmd->add_option("--user", user_path, "user labels, one per line");
    pipe_cmd->add_option("--tau", tau, "merge redundancy threshold");
    pipe_cmd->add_option("--embed-endpoint", embed_endpoint,
                         "embeddings endpoint (for --merge without --mock)");
    pipe_cmd->add_option("--embed-model", embed_model, "embedder model");
    pipe_cmd->add_option("--embed-auth-env", embed_auth_env,
                         "env var with the embedder bearer token");
    pipe_cmd->add_option("--out", out_path, "detection output path")
        ->required();
    pipe_cmd->add_option("--manifest", manifest_path,
                         "manifest output path (default: <out>.manifest.json)");
    pipe_cmd->add_option("--parallel", parallel, "parallel image workers");
    pipe_cmd->add_flag("--strict", strict,
                       "fail the whole run on any per-image failure");
    pipe_cmd->add_option("--timeout", timeout_s, "provider timeout seconds");
    pipe_cmd->add_option("--retries", retries, "provider retry count");
    pipe_cmd->add_option("--mock-fail", mock_fail,
                         "mock: fail images whose name contains this marker");
    pipe_cmd->add_option("--mock-dim", mock_dim, "mock embedder dimension");
    pipe_cmd->callback([&] {
      action = [&] {
        std::unique_ptr<LabelGenerator> generator;
        std::unique_ptr<Detector> detector;
        std::unique_ptr<Embedder> embedder;
        PipelineOptions options;
        if (!prompt.empty()) options.prompt.text = prompt;
        options.parallelism = parallel;
        options.strict = strict;
        if (mock) {
          auto gen = std::make_unique<MockLabelGenerator>();
          if (!mock_fail.empty()) gen->fail_when_name_contains(mock_fail);
          generator = std::move(gen);
          detector = std::make_unique<MockDetector>();
          embedder = std::make_unique<MockEmbedder>(mock_dim);
          options.deterministic_timing = true;
          options.generator_desc = "mock";
          options.detector_desc = "mock";
        } else {
          if (llm_endpoint.empty() || det_endpoint.empty()) {
            throw ValidationError(
                "either --mock or both --llm-endpoint and "
                "--detector-endpoint are required");
          }
          ProviderConfig lcfg{llm_endpoint, llm_model, timeout_s, retries,
                              parallel, llm_auth_env};
          ProviderConfig dcfg{det_endpoint, det_model, timeout_s, retries,
                              parallel, det_auth_env};
          generator = std::make_unique<HttpLabelGenerator>(lcfg);
          detector = std::make_unique<HttpDetector>(dcfg);
          if (!embed_endpoint.empty()) {
            ProviderConfig ecfg{embed_endpoint, embed_model, timeout_s,
                                retries, parallel, embed_auth_env};
            embedder = std::make_unique<HttpEmbedder>(ecfg);
          }
          options.generator_desc = llm_endpoint;
          options.detector_desc = det_endpoint;
        }
        if (merge) {
          if (user_path.empty()) {
            throw ValidationError("--merge requires --user");
          }
          if (embedder == nullptr) {
            throw ValidationError(
                "--merge requires --embed-endpoint (or --mock)");
          }
          options.merge_user_labels = load_label_lines(user_path);
          options.merge_tau = tau;
          options.embedder = embedder.get();
        }
        const PipelineResult result =
            run_pipeline(images_dir, *generator, *detector, options);
        const std::string manifest =
            manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
        atomic_write_file(out_path,
                          detections_to_json_string(result.detections));
        atomic_write_file(manifest,
                          manifest_to_json_string(result, options));
        std::cout << "PIPELINE images=" << result.images.size()
                  << " detections=" << result.detections.size()
                  << " failures=" << result.failures << "\n";
      };
    });
  }

  // ---- embed-fetch --------------------------------------------------------
  auto* embed_cmd = app.add_subcommand(
      "embed-fetch", "Fetch embeddings for a label list");
  {
    static std::string labels_path, endpoint, model, auth_env, out_path;
    static bool mock = false;
    static int mock_dim = 16, retries = 2;
    static double timeout_s = 60.0;
    embed_cmd->add_option("--labels", labels_path, "labels, one per line")
        ->required();
    embed_cmd->add_flag("--mock", mock, "use the deterministic mock embedder");
    embed_cmd->add_option("--endpoint", endpoint, "embeddings endpoint");
    embed_cmd->add_option("--model", model, "embedder model");
    embed_cmd->add_option("--auth-env", auth_env,
                          "env var with the bearer token");
    embed_cmd->add_option("--mock-dim", mock_dim, "mock embedder dimension");
    embed_cmd->add_option("--timeout", timeout_s, "provider timeout seconds");
    embed_cmd->add_option("--retries", retries, "provider retry count");
    embed_cmd->add_option("--out", out_path, "embeddings JSONL output path")
        ->required();
    embed_cmd->callback([&] {
      action = [&] {
        const std::vector<std::string> labels = load_label_lines(labels_path);
        std::unique_ptr<Embedder> embedder;
        if (mock) {
          embedder = std::make_unique<MockEmbedder>(mock_dim);
        } else {
          if (endpoint.empty()) {
            throw ValidationError("either --mock or --endpoint is required");
          }
          ProviderConfig cfg{endpoint, model, timeout_s, retries, 1, auth_env};
          embedder = std::make_unique<HttpEmbedder>(cfg);
        }
        const EmbeddingStore store = embed_labels(labels, *embedder);
        atomic_write_file(out_path, embeddings_to_jsonl_string(store));
        std::cout << "EMBED labels=" << store.size()
                  << " dimension=" << store.dimension() << "\n";
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return run_guarded(action);
}
