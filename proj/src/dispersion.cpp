#include "csprobe/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace csprobe {

namespace {

struct Usable {
  std::vector<WordVector> vectors;
  std::vector<double> probs;
  std::size_t oov = 0;
};

Usable in_vocabulary(const ReplacementSet& r, const EmbeddingTable& table) {
  if (r.empty()) throw Error(ErrorCode::EmptyInput, "replacement set is empty");
  Usable u;
  for (const auto& item : r) {
    if (auto v = table.lookup(item.word)) {
      u.vectors.emplace_back(*v);
      u.probs.push_back(item.p);
    } else {
      ++u.oov;
    }
  }
  if (u.vectors.empty()) {
    throw Error(ErrorCode::NoUsableReplacements, "every replacement is out of vocabulary");
  }
  return u;
}

WordVector original_vector(std::string_view original, const EmbeddingTable& table) {
  auto v = table.lookup(original);
  if (!v) {
    throw Error(ErrorCode::OriginalOov,
                "original token '" + std::string(original) + "' is out of vocabulary");
  }
  return *v;
}

// Probabilities renormalized over the in-vocabulary survivors.
std::vector<double> renormalized(const std::vector<double>& probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0)) {
    throw Error(ErrorCode::ZeroMass, "in-vocabulary replacements carry zero probability");
  }
  std::vector<double> out(probs.size());
  std::transform(probs.begin(), probs.end(), out.begin(), [total](double p) { return p / total; });
  return out;
}

double mean_similarity(const std::vector<WordVector>& vectors, const WordVector& ref) {
  double sum = 0.0;
  for (const auto& v : vectors) sum += cosine_similarity(v, ref);
  return sum / static_cast<double>(vectors.size());
}

double weighted_similarity(const std::vector<WordVector>& vectors,
                           const std::vector<double>& weights, const WordVector& ref) {
  double sum = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    sum += weights[i] * cosine_similarity(vectors[i], ref);
  }
  return sum;
}

}  // namespace

ReplacementSet ReplacementSet::create(std::vector<Replacement> items) {
  double total = 0.0;
  for (const auto& item : items) {
    if (item.word.empty()) throw Error(ErrorCode::InvalidInput, "replacement word is empty");
    if (!std::isfinite(item.p) || item.p < 0.0) {
      throw Error(ErrorCode::InvalidInput, "replacement '" + item.word +
                                               "' has invalid probability " +
                                               std::to_string(item.p));
    }
    total += item.p;
  }
  if (total > 1.0 + kProbabilitySlack) {
    throw Error(ErrorCode::InvalidInput,
                "replacement probabilities sum to " + std::to_string(total) + " > 1");
  }
  std::stable_sort(items.begin(), items.end(), [](const Replacement& a, const Replacement& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.word < b.word;
  });
  ReplacementSet set;
  set.items_ = std::move(items);
  return set;
}

double ReplacementSet::total_mass() const {
  double total = 0.0;
  for (const auto& item : items_) total += item.p;
  return total;
}

ReplacementSet ReplacementSet::truncated(std::size_t k) const {
  ReplacementSet out;
  out.items_.assign(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(k, items_.size())));
  return out;
}

ScoreResult accuracy(const ReplacementSet& r, std::string_view original,
                     const EmbeddingTable& table) {
  const WordVector ref = original_vector(original, table);
  const Usable u = in_vocabulary(r, table);
  return {mean_similarity(u.vectors, ref), u.vectors.size(), u.oov};
}

ScoreResult precision(const ReplacementSet& r, const EmbeddingTable& table) {
  const Usable u = in_vocabulary(r, table);
  const WordVector center = mean_vector(u.vectors);
  return {mean_similarity(u.vectors, center), u.vectors.size(), u.oov};
}

ScoreResult weighted_accuracy(const ReplacementSet& r, std::string_view original,
                              const EmbeddingTable& table) {
  const WordVector ref = original_vector(original, table);
  const Usable u = in_vocabulary(r, table);
  const auto w = renormalized(u.probs);
  return {weighted_similarity(u.vectors, w, ref), u.vectors.size(), u.oov};
}

ScoreResult weighted_precision(const ReplacementSet& r, const EmbeddingTable& table) {
  const Usable u = in_vocabulary(r, table);
  const auto w = renormalized(u.probs);
  const WordVector center =
      weighted_mean_vector(std::span<const WordVector>(u.vectors), std::span<const double>(w));
  return {weighted_similarity(u.vectors, w, center), u.vectors.size(), u.oov};
}

DispersionScores score_mask(const ReplacementSet& r, std::string_view original,
                            const EmbeddingTable& table) {
  const ScoreResult acc = accuracy(r, original, table);
  const ScoreResult prec = precision(r, table);
  const ScoreResult w_acc = weighted_accuracy(r, original, table);
  const ScoreResult w_prec = weighted_precision(r, table);
  return {acc.score, prec.score, w_acc.score, w_prec.score, acc.used, acc.oov};
}

SentenceReport score_sentence(std::string sentence_id, std::size_t length,
                              std::span<const ScoredCloze> items, const EmbeddingTable& table) {
  SentenceReport report;
  report.sentence_id = std::move(sentence_id);
  report.length = length;
  DispersionMeans sum;
  for (const auto& [item, replacements] : items) {
    MaskScore mask{item.mask_index, item.original, replacements.size(), {}, {}, {}};
    try {
      const DispersionScores s = score_mask(replacements, item.original, table);
      sum.acc += s.acc;
      sum.prec += s.prec;
      sum.w_acc += s.w_acc;
      sum.w_prec += s.w_prec;
      mask.scores = s;
      ++report.scored_masks;
    } catch (const Error& e) {
      mask.error = e.code();
      mask.error_message = e.what();
      ++report.excluded_masks;
    }
    report.per_mask.push_back(std::move(mask));
  }
  if (report.scored_masks > 0) {
    const auto n = static_cast<double>(report.scored_masks);
    report.means = DispersionMeans{sum.acc / n, sum.prec / n, sum.w_acc / n, sum.w_prec / n};
  }
  return report;
}

}  // namespace csprobe
