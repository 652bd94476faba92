#pragma once

// Accuracy and precision of an LM's replacement set for one masked token,
// measured as cosine similarity in embedding space, plus the
// probability-weighted variants and per-sentence aggregation.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csprobe/cloze.hpp"
#include "csprobe/embedding.hpp"
#include "csprobe/error.hpp"

namespace csprobe {

/// Slack allowed on the total probability of a top-k slice.
inline constexpr double kProbabilitySlack = 1e-6;

struct Replacement {
  std::string word;
  double p = 0.0;

  friend bool operator==(const Replacement&, const Replacement&) = default;
};

/// An LM's candidates for one mask, kept in canonical order: descending p,
/// ties broken by word. May be empty (a provider can return no candidates);
/// the metrics reject an empty set.
class ReplacementSet {
 public:
  ReplacementSet() = default;

  /// Validates (finite p >= 0, nonempty words, sum p <= 1 + slack) and sorts.
  /// Throws Error(InvalidInput) on violation.
  static ReplacementSet create(std::vector<Replacement> items);

  const std::vector<Replacement>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  double total_mass() const;

  /// The first k items (all of them when k >= size()).
  ReplacementSet truncated(std::size_t k) const;

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const ReplacementSet&, const ReplacementSet&) = default;

 private:
  std::vector<Replacement> items_;
};

struct ScoreResult {
  double score = 0.0;
  std::size_t used = 0;
  std::size_t oov = 0;
};

ScoreResult accuracy(const ReplacementSet& r, std::string_view original,
                     const EmbeddingTable& table);
ScoreResult precision(const ReplacementSet& r, const EmbeddingTable& table);
ScoreResult weighted_accuracy(const ReplacementSet& r, std::string_view original,
                              const EmbeddingTable& table);
/// Uses the probability-weighted mean of the replacement vectors as the reference.
ScoreResult weighted_precision(const ReplacementSet& r, const EmbeddingTable& table);

struct DispersionScores {
  double acc = 0.0;
  double prec = 0.0;
  double w_acc = 0.0;
  double w_prec = 0.0;
  std::size_t used = 0;
  std::size_t oov = 0;
};

/// All four scores for one mask; throws on the first failing metric.
DispersionScores score_mask(const ReplacementSet& r, std::string_view original,
                            const EmbeddingTable& table);

struct MaskScore {
  std::size_t mask_index = 0;
  std::string original;
  std::size_t k = 0;
  std::optional<DispersionScores> scores;
  std::optional<ErrorCode> error;
  std::string error_message;
};

struct DispersionMeans {
  double acc = 0.0;
  double prec = 0.0;
  double w_acc = 0.0;
  double w_prec = 0.0;
};

struct SentenceReport {
  std::string sentence_id;
  std::size_t length = 0;
  std::vector<MaskScore> per_mask;
  /// Empty when no mask could be scored.
  std::optional<DispersionMeans> means;
  std::size_t scored_masks = 0;
  std::size_t excluded_masks = 0;
};

struct ScoredCloze {
  ClozeItem item;
  ReplacementSet replacements;
};

/// Per-mask scores and across-mask means. Masks whose scoring fails are kept
/// in `per_mask` with their error and left out of the means.
SentenceReport score_sentence(std::string sentence_id, std::size_t length,
                              std::span<const ScoredCloze> items, const EmbeddingTable& table);

}  // namespace csprobe
