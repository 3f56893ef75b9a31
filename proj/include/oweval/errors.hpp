#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace oweval {

// Base class for every error this library raises on purpose. The CLI maps
// subclasses to exit codes, so new error types should derive from one of
// the classes below rather than from std::runtime_error directly.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input file could not be parsed (malformed JSON, wrong shape).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a documented invariant (bad bbox, score out of
// range, dangling reference). The message names the offending records.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Label normalization produced an empty string.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Caller passed inconsistent in-memory arguments (e.g. mixed image ids).
class InputError : public Error {
 public:
  using Error::Error;
};

// Embedding vectors disagree on dimension or have zero norm.
class EmbeddingError : public Error {
 public:
  using Error::Error;
};

// One or more labels have no vector in the embedding store. Carries the
// complete sorted list of missing labels, not just the first failure.
class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(std::vector<std::string> missing)
      : Error(build_message(missing)), labels_(std::move(missing)) {}

  const std::vector<std::string>& labels() const { return labels_; }

 private:
  static std::string build_message(const std::vector<std::string>& missing) {
    std::string msg = "missing embeddings for " +
                      std::to_string(missing.size()) + " label(s):";
    for (const auto& l : missing) msg += " \"" + l + "\"";
    return msg;
  }

  std::vector<std::string> labels_;
};

// A remote provider failed after the configured retries, or returned a
// payload that does not match its wire contract.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure while reading or writing, with path context.
class IoError : public Error {
 public:
  using Error::Error;
};

// Internal invariant violation; indicates a bug, not bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace oweval
