#include "csprobe/eval.hpp"

#include "csprobe/stats.hpp"

namespace csprobe {

ConfidenceConfig RunConfig::confidence_config() const {
  ConfidenceConfig c;
  c.gmm.n_components = n_components;
  c.gmm.seed = seed;
  c.gmm.max_iter = max_iter;
  c.gmm.tol = tol;
  c.gmm.variance_floor = variance_floor;
  c.gmm.restarts = gmm_restarts;
  c.zc_over = zc_over;
  c.mass = mass;
  c.soft_mass = soft_mass;
  return c;
}

CorrelationReport correlate(std::string x, std::string y, const std::vector<double>& xs,
                            const std::vector<double>& ys) {
  CorrelationReport report{std::move(x), std::move(y), std::nullopt, xs.size(), {}};
  if (xs.size() < 2) {
    report.note = "fewer than two samples";
    return report;
  }
  try {
    report.pearson_r = pearson_r(xs, ys);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedCorrelation) throw;
    report.note = "constant series";
  }
  return report;
}

std::vector<CorrelationReport> cloze_correlations(const std::vector<SentenceResult>& sentences) {
  std::vector<double> acc, prec, w_acc, w_prec, length;
  for (const auto& s : sentences) {
    if (!s.report.means) continue;
    acc.push_back(s.report.means->acc);
    prec.push_back(s.report.means->prec);
    w_acc.push_back(s.report.means->w_acc);
    w_prec.push_back(s.report.means->w_prec);
    length.push_back(static_cast<double>(s.report.length));
  }
  return {correlate("acc", "prec", acc, prec), correlate("w_acc", "w_prec", w_acc, w_prec),
          correlate("length", "acc", length, acc)};
}

ClozeEvalArtifacts run_cloze_eval(const RunConfig& config,
                                  const std::vector<SentenceRecord>& dataset,
                                  const CandidateProvider& provider, const EmbeddingTable& table,
                                  const StopwordSet& stopwords) {
  ClozeEvalArtifacts out;
  out.config = config;
  out.sentences = parallel_map<SentenceResult>(
      dataset.size(), config.workers, [&](std::size_t i) {
        const SentenceRecord& rec = dataset[i];
        const Sentence sentence = tokenize(rec.text, rec.id);
        std::vector<ScoredCloze> scored;
        std::vector<std::string> request_ids;
        for (auto& item : build_cloze_tests(sentence, stopwords)) {
          CandidateRequest request{detokenize(item.masked_tokens),
                                   rec.id + ":" + std::to_string(item.mask_index), config.k};
          CandidateRecord cand = provider.get(request);
          request_ids.push_back(request.request_id);
          scored.push_back({std::move(item), std::move(cand.candidates)});
        }
        SentenceResult result;
        result.text = rec.text;
        result.report = score_sentence(rec.id, sentence.tokens.size(), scored, table);
        for (std::size_t m = 0; m < scored.size(); ++m) {
          result.masks.push_back(
              {request_ids[m], scored[m].replacements.items(), result.report.per_mask[m]});
        }
        return result;
      });
  out.correlations = cloze_correlations(out.sentences);
  return out;
}

ConfidenceAccounting account(const std::vector<PairOutcome>& pairs) {
  ConfidenceAccounting a;
  a.dataset_size = pairs.size();
  for (const auto r : {NotEncodableReason::LengthMismatch, NotEncodableReason::MultiTokenDiff,
                       NotEncodableReason::ZeroDiff}) {
    a.not_encodable_by_reason[std::string(to_string(r))] = 0;
  }
  for (const auto r : {SkipReason::ChoiceOov, SkipReason::NoCandidates,
                       SkipReason::AllCandidatesOov, SkipReason::TooFewCandidates,
                       SkipReason::ZeroMass, SkipReason::DegenerateGeometry}) {
    a.skipped_by_reason[std::string(to_string(r))] = 0;
  }
  for (const auto& p : pairs) {
    if (p.not_encodable) {
      ++a.not_encodable;
      ++a.not_encodable_by_reason[std::string(to_string(*p.not_encodable))];
      continue;
    }
    ++a.encodable;
    if (!p.result) throw Error(ErrorCode::Internal, "encodable pair without a result");
    if (p.result->skipped) {
      ++a.skipped;
      ++a.skipped_by_reason[std::string(to_string(*p.result->skipped))];
    } else if (p.result->correct) {
      ++a.scored;
      ++a.correct;
    } else {
      ++a.scored;
      ++a.incorrect;
    }
  }
  if (a.encodable + a.not_encodable != a.dataset_size ||
      a.correct + a.incorrect + a.skipped != a.encodable) {
    throw Error(ErrorCode::Internal, "pair accounting does not reconcile");
  }
  if (a.scored > 0) a.accuracy = static_cast<double>(a.correct) / static_cast<double>(a.scored);
  return a;
}

ConfidenceEvalArtifacts run_confidence_eval(const RunConfig& config,
                                            const std::vector<PairRecord>& dataset,
                                            const CandidateProvider& provider,
                                            const EmbeddingTable& table) {
  ConfidenceEvalArtifacts out;
  out.config = config;
  const ConfidenceConfig cc = config.confidence_config();
  out.pairs = parallel_map<PairOutcome>(dataset.size(), config.workers, [&](std::size_t i) {
    const PairRecord& rec = dataset[i];
    PairOutcome outcome;
    outcome.pair_id = rec.id;
    const EncodeResult encoded =
        encode_pair(tokenize(rec.sentence_a, rec.id), tokenize(rec.sentence_b, rec.id), rec.gold);
    if (const auto* bad = std::get_if<NotEncodable>(&encoded)) {
      outcome.not_encodable = bad->reason;
      return outcome;
    }
    const ChoicePair& pair = std::get<ChoicePair>(encoded);
    outcome.masked_text = detokenize(pair.shared_masked_tokens);
    const CandidateRecord cand =
        provider.get(CandidateRequest{outcome.masked_text, pair.id, config.candidates_k});
    outcome.result = score_pair(pair, cand.candidates, table, cc);
    outcome.pair = pair;
    return outcome;
  });
  out.accounting = account(out.pairs);
  std::vector<ConfidenceResult> results;
  for (const auto& p : out.pairs) {
    if (p.result) results.push_back(*p.result);
  }
  out.violin = summarize_confidences(results);
  return out;
}

}  // namespace csprobe
