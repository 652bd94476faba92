#pragma once

// Experiment pipelines: cloze dispersion over a sentence dataset and
// two-choice confidence over a pair dataset.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "csprobe/cloze.hpp"
#include "csprobe/confidence.hpp"
#include "csprobe/dispersion.hpp"
#include "csprobe/embedding.hpp"
#include "csprobe/lm_gateway.hpp"

namespace csprobe {

struct RunConfig {
  std::string command;
  std::string embeddings_path;
  std::optional<std::size_t> dim;
  std::string dataset_path;
  std::string fixture_path;
  std::string lm_url;
  std::size_t k = 5;
  std::size_t candidates_k = 30;
  std::size_t n_components = 2;
  std::uint64_t seed = 7;
  std::size_t gmm_restarts = 1;
  std::size_t max_iter = 200;
  double tol = 1e-6;
  double variance_floor = 1e-6;
  std::string stopwords_path;  // empty: bundled list
  std::string out_dir;
  ZcOver zc_over = ZcOver::Choices;
  MassMode mass = MassMode::Normalized;
  bool soft_mass = false;
  std::size_t workers = 1;
  std::chrono::milliseconds lm_timeout{10000};
  std::size_t lm_retries = 2;

  ConfidenceConfig confidence_config() const;
};

struct CorrelationReport {
  std::string x;
  std::string y;
  std::optional<double> pearson_r;
  std::size_t n = 0;
  /// Why `pearson_r` is missing, if it is.
  std::string note;
};

/// Pearson r over the pairs, or a note when undefined.
CorrelationReport correlate(std::string x, std::string y, const std::vector<double>& xs,
                            const std::vector<double>& ys);

struct MaskRecord {
  std::string request_id;
  std::vector<Replacement> replacements;
  MaskScore score;
};

struct SentenceResult {
  std::string text;
  std::vector<MaskRecord> masks;
  SentenceReport report;
};

struct ClozeEvalArtifacts {
  RunConfig config;
  std::vector<SentenceResult> sentences;
  std::vector<CorrelationReport> correlations;
};

struct PairOutcome {
  std::string pair_id;
  std::optional<NotEncodableReason> not_encodable;
  std::optional<ChoicePair> pair;
  std::string masked_text;
  std::optional<ConfidenceResult> result;
};

struct ConfidenceAccounting {
  std::size_t dataset_size = 0;
  std::size_t encodable = 0;
  std::size_t not_encodable = 0;
  std::map<std::string, std::size_t> not_encodable_by_reason;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> skipped_by_reason;
  std::optional<double> accuracy;
};

struct ConfidenceEvalArtifacts {
  RunConfig config;
  std::vector<PairOutcome> pairs;
  ConfidenceAccounting accounting;
  ViolinSummary violin;
};

std::vector<CorrelationReport> cloze_correlations(const std::vector<SentenceResult>& sentences);

ClozeEvalArtifacts run_cloze_eval(const RunConfig& config,
                                  const std::vector<SentenceRecord>& dataset,
                                  const CandidateProvider& provider, const EmbeddingTable& table,
                                  const StopwordSet& stopwords);

ConfidenceAccounting account(const std::vector<PairOutcome>& pairs);

ConfidenceEvalArtifacts run_confidence_eval(const RunConfig& config,
                                            const std::vector<PairRecord>& dataset,
                                            const CandidateProvider& provider,
                                            const EmbeddingTable& table);

/// Applies `fn` to 0..n-1 on up to `workers` threads and returns results in
/// index order. The exception of the lowest failing index is rethrown.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::max<std::size_t>(1, std::min(workers, n));
  if (width == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(width);
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(work, w, width);
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace csprobe
