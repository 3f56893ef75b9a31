#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oweval/matching.hpp"
#include "oweval/types.hpp"

namespace oweval {

struct KeptLabel {
  std::string label;
  // Highest similarity to any user label; absent when there are none.
  std::optional<double> max_similarity;
};

struct DroppedLabel {
  std::string label;
  std::string nearest_user_label;
  double similarity = 0.0;
};

// Result of redundancy-filtered vocabulary merging. `merged` is the user
// labels followed by the kept generated labels, duplicate-free; every
// generated label lands in exactly one of kept/dropped.
struct MergeResult {
  std::vector<std::string> merged;
  std::vector<KeptLabel> kept_generated;
  std::vector<DroppedLabel> dropped_generated;
};

namespace detail {

inline std::vector<std::string> normalized_unique(
    const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    std::string n = normalize_label(l);
    if (seen.insert(n).second) out.push_back(std::move(n));
  }
  return out;
}

}  // namespace detail

// Keeps a generated label only when its maximum cosine similarity to every
// user label is strictly below tau; equality drops it. With no user labels
// the maximum over the empty set is -inf, so everything is kept. tau > 1
// therefore keeps every generated label. Inputs are normalized and
// deduplicated (first occurrence wins) before filtering.
inline MergeResult merge_vocab(const std::vector<std::string>& user,
                               const std::vector<std::string>& generated,
                               const EmbeddingStore& store, double tau) {
  const std::vector<std::string> users = detail::normalized_unique(user);
  const std::vector<std::string> gens = detail::normalized_unique(generated);

  if (!users.empty()) {
    std::set<std::string> missing;
    for (const auto& l : users) {
      if (!store.contains(l)) missing.insert(l);
    }
    for (const auto& l : gens) {
      if (!store.contains(l)) missing.insert(l);
    }
    if (!missing.empty()) {
      throw MissingEmbeddingError(
          std::vector<std::string>(missing.begin(), missing.end()));
    }
  }

  MergeResult result;
  result.merged = users;
  std::set<std::string> in_merged(users.begin(), users.end());

  for (const auto& g : gens) {
    if (users.empty()) {
      result.kept_generated.push_back(KeptLabel{g, std::nullopt});
      if (in_merged.insert(g).second) result.merged.push_back(g);
      continue;
    }
    const std::vector<double>& gvec = *store.find(g);
    double max_sim = 0.0;
    std::string nearest;
    bool first = true;
    for (const auto& u : users) {
      const double sim = cosine_similarity(gvec, *store.find(u));
      if (first || sim > max_sim) {
        max_sim = sim;
        nearest = u;
        first = false;
      }
    }
    if (max_sim < tau) {
      result.kept_generated.push_back(KeptLabel{g, max_sim});
      if (in_merged.insert(g).second) result.merged.push_back(g);
    } else {
      result.dropped_generated.push_back(DroppedLabel{g, nearest, max_sim});
    }
  }
  return result;
}

}  // namespace oweval
