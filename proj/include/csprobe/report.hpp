#pragma once

// Artifact files written by the experiment commands, and the `report`
// command that re-derives every aggregate from the per-item records.
//
//   cloze_masks.jsonl         one record per masked token
//   cloze_sentences.jsonl     one record per sentence (the four means)
//   cloze_summary.json        config echo, seed, counts, correlations
//   confidence_pairs.jsonl    one record per dataset pair
//   confidence_summary.json   config echo, seed, accounting, accuracy, violin stats
//   confidence_plot.json      group label -> confidence values
//   report.txt                human-readable tables (written by `report`)

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csprobe/eval.hpp"
#include "csprobe/gmm.hpp"

namespace csprobe {

inline constexpr const char* kClozeMasksFile = "cloze_masks.jsonl";
inline constexpr const char* kClozeSentencesFile = "cloze_sentences.jsonl";
inline constexpr const char* kClozeSummaryFile = "cloze_summary.json";
inline constexpr const char* kPairsFile = "confidence_pairs.jsonl";
inline constexpr const char* kConfidenceSummaryFile = "confidence_summary.json";
inline constexpr const char* kPlotFile = "confidence_plot.json";
inline constexpr const char* kReportFile = "report.txt";

/// Config echo. Input paths are reduced to file names; the output directory
/// and worker count are left out since they never affect results.
nlohmann::json config_json(const RunConfig& config);
nlohmann::json model_json(const MixtureModel<double>& model);
nlohmann::json correlation_json(const CorrelationReport& c);
nlohmann::json group_stats_json(const GroupStats& g);

nlohmann::json mask_record_json(const std::string& sentence_id, const MaskRecord& mask);
nlohmann::json sentence_record_json(const SentenceResult& sentence);
nlohmann::json cloze_summary_json(const ClozeEvalArtifacts& artifacts);

nlohmann::json pair_record_json(const PairOutcome& outcome);
nlohmann::json confidence_summary_json(const ConfidenceEvalArtifacts& artifacts);
nlohmann::json plot_data_json(const ViolinSummary& violin);

/// Writes the artifact files into `dir` (created if absent); returns their paths.
std::vector<std::filesystem::path> emit_report(const ClozeEvalArtifacts& artifacts,
                                               const std::filesystem::path& dir);
std::vector<std::filesystem::path> emit_report(const ConfidenceEvalArtifacts& artifacts,
                                               const std::filesystem::path& dir);

/// Reads whatever artifacts exist in `dir`, recomputes aggregates from the
/// per-item records, checks them against the stored summaries (Internal
/// error on mismatch), writes report.txt and returns its text.
std::string render_report(const std::filesystem::path& dir);

}  // namespace csprobe
