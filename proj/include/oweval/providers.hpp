#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "oweval/errors.hpp"
#include "oweval/types.hpp"

namespace oweval {

// Prompt sent to the label generator. The default asks for a plain object
// inventory; granularity is steered entirely through this text.
inline constexpr const char* kDefaultPrompt =
    "List the objects that you see in this image.";

struct PromptTemplate {
  std::string text = kDefaultPrompt;
};

// Connection settings for one remote provider.
struct ProviderConfig {
  std::string endpoint;       // e.g. http://host:port/v1/chat/completions
  std::string model;          // model name forwarded in the request
  double timeout_s = 60.0;    // per-attempt timeout
  int max_retries = 2;        // additional attempts after the first
  int max_parallel = 4;       // advisory; used by the pipeline
  std::string auth_env;       // env var holding the bearer token, "" = none
};

// A detection as returned by a detector provider, before image/index
// bookkeeping is attached.
struct RawDetection {
  BBox box;
  std::string label;  // normalized
  double score = 0.0;
};

class LabelGenerator {
 public:
  virtual ~LabelGenerator() = default;
  // Free-text reply for one image. `image_name` is context for scripted
  // fixtures and error messages; the bytes are the payload. Providers report
  // how many attempts the call took through `attempts` when non-null.
  virtual std::string generate_reply(const std::string& image_name,
                                     const std::string& image_bytes,
                                     const std::string& prompt,
                                     int* attempts = nullptr) = 0;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<RawDetection> run_detection(
      const std::string& image_bytes, const std::vector<std::string>& labels,
      int* attempts = nullptr) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // One vector per input label, in input order.
  virtual std::vector<std::vector<double>> embed(
      const std::vector<std::string>& labels, int* attempts = nullptr) = 0;
};

namespace detail {

inline std::string base64_encode(std::string_view data) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= data.size()) {
    const std::uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                            (static_cast<unsigned char>(data[i + 1]) << 8) |
                            static_cast<unsigned char>(data[i + 2]);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
    i += 3;
  }
  const std::size_t rest = data.size() - i;
  if (rest == 1) {
    const std::uint32_t n = static_cast<unsigned char>(data[i]) << 16;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t n = (static_cast<unsigned char>(data[i]) << 16) |
                            (static_cast<unsigned char>(data[i + 1]) << 8);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::string sniff_image_mime(std::string_view bytes) {
  auto starts = [&](std::string_view magic) {
    return bytes.substr(0, magic.size()) == magic;
  };
  if (starts("\x89PNG")) return "image/png";
  if (starts("\xFF\xD8\xFF")) return "image/jpeg";
  if (starts("GIF8")) return "image/gif";
  if (starts("BM")) return "image/bmp";
  if (bytes.size() >= 12 && bytes.substr(0, 4) == "RIFF" &&
      bytes.substr(8, 4) == "WEBP") {
    return "image/webp";
  }
  return "application/octet-stream";
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D4BE5B4B1A7D4Dull;
  return z ^ (z >> 31);
}

// splitmix64 output scaled to [0,1).
inline double unit_double(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path, "/" when absent
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ProviderError("endpoint URL missing scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return SplitUrl{url, "/"};
  }
  return SplitUrl{url.substr(0, path_start), url.substr(path_start)};
}

inline std::string excerpt(const std::string& s, std::size_t limit = 200) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "...";
}

// POST JSON with bounded retries and exponential backoff. Retries transport
// errors, 429 and 5xx; other statuses fail immediately.
inline std::string http_post_json(const ProviderConfig& cfg,
                                  const std::string& body, int* attempts_out) {
  const SplitUrl url = split_url(cfg.endpoint);
  std::string last_error;
  int attempts = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto backoff =
          std::chrono::milliseconds(250) * (1 << std::min(attempt - 1, 4));
      std::this_thread::sleep_for(backoff);
    }
    ++attempts;
    httplib::Client client(url.base);
    const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg.auth_env.empty()) {
      if (const char* token = std::getenv(cfg.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }
    httplib::Result res =
        client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " +
                   excerpt(res->body);
      continue;
    }
    if (res->status != 200) {
      if (attempts_out) *attempts_out = attempts;
      throw ProviderError(cfg.endpoint + ": HTTP " +
                          std::to_string(res->status) + ": " +
                          excerpt(res->body));
    }
    if (attempts_out) *attempts_out = attempts;
    return res->body;
  }
  if (attempts_out) *attempts_out = attempts;
  throw ProviderError(cfg.endpoint + ": failed after " +
                      std::to_string(attempts) + " attempt(s); " + last_error);
}

}  // namespace detail

// Splits a free-text reply into normalized labels: newline/comma/semicolon
// separated items, leading list markers ("-", "*", "1.", "2)") stripped,
// duplicates removed preserving first occurrence. Idempotent.
inline std::vector<std::string> parse_label_reply(const std::string& text) {
  std::vector<std::string> labels;
  std::set<std::string> seen;
  std::string item;
  auto flush = [&] {
    // Strip one leading list marker.
    std::size_t p = 0;
    while (p < item.size() &&
           std::isspace(static_cast<unsigned char>(item[p]))) {
      ++p;
    }
    std::size_t q = p;
    while (q < item.size() &&
           std::isdigit(static_cast<unsigned char>(item[q]))) {
      ++q;
    }
    if (q > p && q < item.size() && (item[q] == '.' || item[q] == ')')) {
      p = q + 1;
    } else if (p < item.size() &&
               (item[p] == '-' || item[p] == '*' || item[p] == '+')) {
      p += 1;
    }
    const std::string body = item.substr(p);
    item.clear();
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) return;
    const std::string label = normalize_label(body);
    if (seen.insert(label).second) labels.push_back(label);
  };
  for (char c : text) {
    if (c == '\n' || c == ',' || c == ';') {
      flush();
    } else {
      item.push_back(c);
    }
  }
  flush();
  return labels;
}

// ---------------------------------------------------------------------------
// HTTP provider implementations
// ---------------------------------------------------------------------------

// Chat-completion-style label generator: one user message carrying the
// prompt text and the image as a base64 data URL; the reply text is
// choices[0].message.content.
class HttpLabelGenerator : public LabelGenerator {
 public:
  explicit HttpLabelGenerator(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

  std::string generate_reply(const std::string& image_name,
                             const std::string& image_bytes,
                             const std::string& prompt,
                             int* attempts = nullptr) override {
    (void)image_name;
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["temperature"] = 0;
    body["messages"] = nlohmann::json::array(
        {{{"role", "user"},
          {"content",
           nlohmann::json::array(
               {{{"type", "text"}, {"text", prompt}},
                {{"type", "image_url"},
                 {"image_url",
                  {{"url", "data:" + detail::sniff_image_mime(image_bytes) +
                               ";base64," +
                               detail::base64_encode(image_bytes)}}}}})}}});
    const std::string reply =
        detail::http_post_json(cfg_, body.dump(), attempts);
    try {
      const nlohmann::json j = nlohmann::json::parse(reply);
      return j.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError(cfg_.endpoint + ": unexpected reply shape: " +
                          detail::excerpt(reply));
    }
  }

 private:
  ProviderConfig cfg_;
};

// Detector contract: {"image": <base64>, "labels": [...]} in,
// {"detections": [{"bbox": [x,y,w,h], "label": ..., "score": ...}]} out.
class HttpDetector : public Detector {
 public:
  explicit HttpDetector(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<RawDetection> run_detection(const std::string& image_bytes,
                                          const std::vector<std::string>& labels,
                                          int* attempts = nullptr) override {
    nlohmann::json body;
    if (!cfg_.model.empty()) body["model"] = cfg_.model;
    body["image"] = detail::base64_encode(image_bytes);
    body["labels"] = labels;
    const std::string reply =
        detail::http_post_json(cfg_, body.dump(), attempts);
    std::vector<RawDetection> out;
    try {
      const nlohmann::json j = nlohmann::json::parse(reply);
      for (const auto& det : j.at("detections")) {
        const auto& bb = det.at("bbox");
        RawDetection r;
        r.box = BBox::make(bb.at(0).get<double>(), bb.at(1).get<double>(),
                           bb.at(2).get<double>(), bb.at(3).get<double>());
        r.label = normalize_label(det.at("label").get<std::string>());
        r.score = det.at("score").get<double>();
        out.push_back(std::move(r));
      }
    } catch (const nlohmann::json::exception&) {
      throw ProviderError(cfg_.endpoint + ": unexpected reply shape: " +
                          detail::excerpt(reply));
    } catch (const Error& e) {
      throw ProviderError(cfg_.endpoint + ": invalid detection payload (" +
                          e.what() + "): " + detail::excerpt(reply));
    }
    return out;
  }

 private:
  ProviderConfig cfg_;
};

// Embedder contract mirrors OpenAI embeddings: {"model", "input": [...]} in,
// {"data": [{"index": i, "embedding": [...]}]} out.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& labels,
                                         int* attempts = nullptr) override {
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["input"] = labels;
    const std::string reply =
        detail::http_post_json(cfg_, body.dump(), attempts);
    std::vector<std::vector<double>> out(labels.size());
    std::vector<bool> filled(labels.size(), false);
    try {
      const nlohmann::json j = nlohmann::json::parse(reply);
      const auto& data = j.at("data");
      if (data.size() != labels.size()) {
        throw ProviderError(cfg_.endpoint + ": expected " +
                            std::to_string(labels.size()) +
                            " embeddings, got " + std::to_string(data.size()));
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& item = data[i];
        const std::size_t slot =
            item.contains("index") ? item.at("index").get<std::size_t>() : i;
        if (slot >= labels.size() || filled[slot]) {
          throw ProviderError(cfg_.endpoint + ": bad embedding index " +
                              std::to_string(slot));
        }
        out[slot] = item.at("embedding").get<std::vector<double>>();
        filled[slot] = true;
      }
    } catch (const nlohmann::json::exception&) {
      throw ProviderError(cfg_.endpoint + ": unexpected reply shape: " +
                          detail::excerpt(reply));
    }
    return out;
  }

 private:
  ProviderConfig cfg_;
};

// ---------------------------------------------------------------------------
// Deterministic mocks
// ---------------------------------------------------------------------------

// Scripted, deterministic label generator. Exact-prompt scripts take
// precedence; otherwise the reply is derived from a stable hash of the
// image bytes and the prompt, drawn from a fixed vocabulary and formatted
// as a numbered list so the reply parser is exercised end to end.
class MockLabelGenerator : public LabelGenerator {
 public:
  MockLabelGenerator() = default;

  // Reply returned verbatim whenever `prompt` matches exactly.
  void script_prompt(const std::string& prompt, const std::string& reply) {
    prompt_scripts_[prompt] = reply;
  }

  // Reply for a specific (image_name, prompt) pair; wins over prompt scripts.
  void script_image(const std::string& image_name, const std::string& prompt,
                    const std::string& reply) {
    image_scripts_[image_name + "\x1f" + prompt] = reply;
  }

  // Images whose name contains the marker fail with ProviderError.
  void fail_when_name_contains(const std::string& marker) {
    fail_marker_ = marker;
  }

  std::string generate_reply(const std::string& image_name,
                             const std::string& image_bytes,
                             const std::string& prompt,
                             int* attempts = nullptr) override {
    if (attempts) *attempts = 1;
    if (!fail_marker_.empty() &&
        image_name.find(fail_marker_) != std::string::npos) {
      throw ProviderError("mock label generator scripted failure for " +
                          image_name);
    }
    if (auto it = image_scripts_.find(image_name + "\x1f" + prompt);
        it != image_scripts_.end()) {
      return it->second;
    }
    if (auto it = prompt_scripts_.find(prompt); it != prompt_scripts_.end()) {
      return it->second;
    }
    std::uint64_t state =
        detail::fnv1a64(image_bytes) ^ (detail::fnv1a64(prompt) * 0x9E37ull);
    const int count = 1 + static_cast<int>(detail::splitmix64(state) % 4);
    std::string reply;
    std::set<std::size_t> used;
    for (int i = 0; i < count; ++i) {
      const std::size_t pick =
          detail::splitmix64(state) % kMockVocabulary.size();
      if (!used.insert(pick).second) continue;
      reply += std::to_string(i + 1) + ". " + kMockVocabulary[pick] + "\n";
    }
    return reply;
  }

 private:
  static inline const std::vector<std::string> kMockVocabulary = {
      "person",     "car",          "bicycle",   "chair",     "dog",
      "cat",        "broom",        "faucet",    "teddy bear","glasses",
      "cardboard box", "traffic light", "backpack", "bench",  "bottle",
      "cup",        "laptop",       "plant",     "shoe",      "umbrella"};

  std::map<std::string, std::string> prompt_scripts_;
  std::map<std::string, std::string> image_scripts_;
  std::string fail_marker_;
};

// Deterministic detector: a stable hash of (image bytes, label) yields zero
// to two boxes per queried label with scores in [0,1].
class MockDetector : public Detector {
 public:
  std::vector<RawDetection> run_detection(const std::string& image_bytes,
                                          const std::vector<std::string>& labels,
                                          int* attempts = nullptr) override {
    if (attempts) *attempts = 1;
    std::vector<RawDetection> out;
    for (const auto& label : labels) {
      std::uint64_t state = detail::fnv1a64(image_bytes) ^
                            (detail::fnv1a64(label) * 0x2545F4914F6CDD1Dull);
      const int boxes = static_cast<int>(detail::splitmix64(state) % 3);
      for (int b = 0; b < boxes; ++b) {
        RawDetection r;
        const double x = detail::unit_double(state) * 95.0;
        const double y = detail::unit_double(state) * 95.0;
        const double w = 5.0 + detail::unit_double(state) * 35.0;
        const double h = 5.0 + detail::unit_double(state) * 35.0;
        r.box = BBox::make(x, y, w, h);
        r.label = label;
        r.score = static_cast<double>(detail::splitmix64(state) % 10001) /
                  10000.0;
        out.push_back(std::move(r));
      }
    }
    return out;
  }
};

// Deterministic hash-to-vector embedder. Identical labels always map to the
// identical vector; vectors are unit-norm.
class MockEmbedder : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dimension = 16) : dimension_(dimension) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& labels,
                                         int* attempts = nullptr) override {
    if (attempts) *attempts = 1;
    std::vector<std::vector<double>> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
      std::uint64_t state = detail::fnv1a64(label);
      std::vector<double> v(dimension_);
      double sq = 0.0;
      for (auto& c : v) {
        c = detail::unit_double(state) * 2.0 - 1.0;
        sq += c * c;
      }
      const double norm = std::sqrt(sq);
      for (auto& c : v) c /= norm;
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::size_t dimension_;
};

// ---------------------------------------------------------------------------
// Provider-facing operations
// ---------------------------------------------------------------------------

// Queries the generator and parses its reply into normalized labels. A blank
// reply is an empty list with a warning, not an error.
inline std::vector<std::string> generate_labels(
    const std::string& image_name, const std::string& image_bytes,
    const PromptTemplate& prompt, LabelGenerator& provider,
    std::vector<std::string>* warnings = nullptr, int* attempts = nullptr) {
  if (image_bytes.empty()) {
    throw InputError("generate_labels called with empty image bytes");
  }
  const std::string reply =
      provider.generate_reply(image_name, image_bytes, prompt.text, attempts);
  std::vector<std::string> labels = parse_label_reply(reply);
  if (labels.empty() && warnings != nullptr) {
    warnings->push_back(image_name + ": label generator returned no labels");
  }
  return labels;
}

// Runs detection over the supplied label set. Empty label lists short-circuit
// to no detections without touching the provider. Returned labels outside the
// query set are dropped with a warning; out-of-range scores are a contract
// violation.
inline std::vector<Detection> detect(
    const std::string& image_bytes, const std::vector<std::string>& labels,
    Detector& provider, std::int64_t image_id,
    std::vector<std::string>* warnings = nullptr, int* attempts = nullptr) {
  if (attempts) *attempts = 0;
  if (labels.empty()) return {};
  const std::set<std::string> allowed(labels.begin(), labels.end());
  const std::vector<RawDetection> raw =
      provider.run_detection(image_bytes, labels, attempts);
  std::vector<Detection> out;
  std::int64_t index = 0;
  for (const auto& r : raw) {
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
      throw ProviderError("detector returned score " +
                          std::to_string(r.score) + " outside [0,1]");
    }
    if (allowed.count(r.label) == 0) {
      if (warnings != nullptr) {
        warnings->push_back("detector returned label \"" + r.label +
                            "\" outside the query set; record dropped");
      }
      continue;
    }
    Detection d;
    d.image_id = image_id;
    d.box = r.box;
    d.label = r.label;
    d.score = r.score;
    d.index = index++;
    out.push_back(std::move(d));
  }
  return out;
}

// Embeds each unique label once and returns a store fragment.
inline EmbeddingStore embed_labels(const std::vector<std::string>& labels,
                                   Embedder& provider, int* attempts = nullptr) {
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    const std::string n = normalize_label(l);
    if (seen.insert(n).second) unique.push_back(n);
  }
  EmbeddingStore store;
  if (unique.empty()) {
    if (attempts) *attempts = 0;
    return store;
  }
  const std::vector<std::vector<double>> vectors =
      provider.embed(unique, attempts);
  if (vectors.size() != unique.size()) {
    throw ProviderError("embedder returned " + std::to_string(vectors.size()) +
                        " vectors for " + std::to_string(unique.size()) +
                        " labels");
  }
  for (std::size_t i = 0; i < unique.size(); ++i) {
    store.insert(unique[i], vectors[i]);
  }
  return store;
}

}  // namespace oweval
