#pragma once

// Two-choice confidence: cluster the LM's candidates for the masked
// position, then score each answer choice by its normalized closeness to
// every cluster center, weighted by the cluster's probability mass.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csprobe/cloze.hpp"
#include "csprobe/dispersion.hpp"
#include "csprobe/embedding.hpp"
#include "csprobe/gmm.hpp"

namespace csprobe {

/// Which words normalize the distance to a cluster center.
enum class ZcOver { Choices, Candidates };
/// Whether cluster masses are rescaled to sum to one before weighting.
enum class MassMode { Normalized, Raw };

std::string_view to_string(ZcOver z) noexcept;
std::string_view to_string(MassMode m) noexcept;

struct ConfidenceConfig {
  /// `gmm.seed` is the base seed; each pair fits with derive_seed(base, pair id).
  GmmOptions gmm;
  ZcOver zc_over = ZcOver::Choices;
  MassMode mass = MassMode::Normalized;
  /// Responsibility-weighted masses instead of hard-assignment sums.
  bool soft_mass = false;
};

/// 1 - dist(choice, center) / sum_{w in normalizers} dist(w, center), with
/// cosine distance. Throws DegenerateGeometry when the normalizer is zero.
double differential_distance(const WordVector& center, const WordVector& choice,
                             std::span<const WordVector> normalizers);

struct ClusterSummary {
  WordVector center;
  double raw_mass = 0.0;
  double mass = 0.0;  // raw_mass / sum of raw masses
  std::vector<Replacement> members;
};

/// Per-cluster LM probability mass. `candidates` must be the in-vocabulary
/// candidates, row-aligned with `assignment`. Soft mode splits each
/// candidate's p across clusters by responsibility; membership stays hard.
std::vector<ClusterSummary> cluster_mass(const MixtureModel<double>& model,
                                         const HardAssignment<double>& assignment,
                                         std::span<const Replacement> candidates,
                                         bool soft = false);

enum class SkipReason {
  ChoiceOov,
  NoCandidates,
  AllCandidatesOov,
  TooFewCandidates,
  ZeroMass,
  DegenerateGeometry,
};

std::string_view to_string(SkipReason r) noexcept;

struct ConfidenceResult {
  std::string pair_id;
  std::string choice_a;
  std::string choice_b;
  Choice gold = Choice::A;
  double conf_a = 0.0;
  double conf_b = 0.0;
  Choice predicted = Choice::A;
  bool correct = false;
  double margin = 0.0;
  std::optional<SkipReason> skipped;
  std::size_t candidates_total = 0;
  std::size_t candidates_oov = 0;
  std::uint64_t seed = 0;
  std::vector<ClusterSummary> clusters;
  std::optional<MixtureModel<double>> model;

  double conf(Choice c) const { return c == Choice::A ? conf_a : conf_b; }
};

/// Full pipeline for one encoded pair. Never throws for data conditions;
/// they are reported through `skipped`.
ConfidenceResult score_pair(const ChoicePair& pair, const ReplacementSet& candidates,
                            const EmbeddingTable& table, const ConfidenceConfig& config);

struct GroupStats {
  std::string label;
  std::vector<double> values;
  std::size_t count = 0;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> median;
  std::optional<double> mean;
};

/// Groups, in order: predicted-label confidence over incorrect pairs,
/// correct-label confidence over incorrect pairs, predicted-label confidence
/// over correct pairs. Skipped results are ignored.
struct ViolinSummary {
  std::array<GroupStats, 3> groups;
};

GroupStats group_stats(std::string label, std::vector<double> values);
ViolinSummary summarize_confidences(std::span<const ConfidenceResult> results);

}  // namespace csprobe
