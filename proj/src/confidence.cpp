#include "csprobe/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace csprobe {

std::string_view to_string(ZcOver z) noexcept {
  return z == ZcOver::Choices ? "choices" : "candidates";
}

std::string_view to_string(MassMode m) noexcept {
  return m == MassMode::Normalized ? "normalized" : "raw";
}

std::string_view to_string(SkipReason r) noexcept {
  switch (r) {
    case SkipReason::ChoiceOov: return "choice_oov";
    case SkipReason::NoCandidates: return "no_candidates";
    case SkipReason::AllCandidatesOov: return "all_candidates_oov";
    case SkipReason::TooFewCandidates: return "too_few_candidates";
    case SkipReason::ZeroMass: return "zero_mass";
    case SkipReason::DegenerateGeometry: return "degenerate_geometry";
  }
  return "unknown";
}

double differential_distance(const WordVector& center, const WordVector& choice,
                             std::span<const WordVector> normalizers) {
  double z = 0.0;
  for (const auto& w : normalizers) z += cosine_distance(w, center);
  if (!(z > 0.0)) {
    throw Error(ErrorCode::DegenerateGeometry,
                "every normalizing word coincides with the cluster center");
  }
  return 1.0 - cosine_distance(choice, center) / z;
}

std::vector<ClusterSummary> cluster_mass(const MixtureModel<double>& model,
                                         const HardAssignment<double>& assignment,
                                         std::span<const Replacement> candidates, bool soft) {
  if (assignment.labels.size() != candidates.size()) {
    throw Error(ErrorCode::InvalidInput, "assignment does not cover the candidate list");
  }
  const std::size_t k = model.n_components();
  std::vector<ClusterSummary> clusters(k);
  for (std::size_t c = 0; c < k; ++c) {
    clusters[c].center = model.means.row(static_cast<Eigen::Index>(c)).transpose();
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::size_t label = assignment.labels[i];
    clusters[label].members.push_back(candidates[i]);
    if (soft) {
      for (std::size_t c = 0; c < k; ++c) {
        clusters[c].raw_mass +=
            candidates[i].p * assignment.responsibilities(static_cast<Eigen::Index>(i),
                                                          static_cast<Eigen::Index>(c));
      }
    } else {
      clusters[label].raw_mass += candidates[i].p;
    }
  }
  double total = 0.0;
  for (const auto& c : clusters) total += c.raw_mass;
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroMass, "clustered candidates carry no probability");
  for (auto& c : clusters) c.mass = c.raw_mass / total;
  return clusters;
}

ConfidenceResult score_pair(const ChoicePair& pair, const ReplacementSet& candidates,
                            const EmbeddingTable& table, const ConfidenceConfig& config) {
  ConfidenceResult result;
  result.pair_id = pair.id;
  result.choice_a = pair.choice_a;
  result.choice_b = pair.choice_b;
  result.gold = pair.gold;
  result.candidates_total = candidates.size();
  result.seed = derive_seed(config.gmm.seed, pair.id);

  auto skip = [&](SkipReason reason) {
    result.skipped = reason;
    return result;
  };

  if (candidates.empty()) return skip(SkipReason::NoCandidates);
  const auto va = table.lookup(pair.choice_a);
  const auto vb = table.lookup(pair.choice_b);
  if (!va || !vb) return skip(SkipReason::ChoiceOov);
  const std::vector<WordVector> choices{*va, *vb};

  std::vector<Replacement> usable;
  std::vector<WordVector> vectors;
  for (const auto& cand : candidates) {
    if (auto v = table.lookup(cand.word)) {
      usable.push_back(cand);
      vectors.emplace_back(*v);
    } else {
      ++result.candidates_oov;
    }
  }
  if (usable.empty()) return skip(SkipReason::AllCandidatesOov);
  if (usable.size() < config.gmm.n_components) return skip(SkipReason::TooFewCandidates);

  GmmOptions gmm = config.gmm;
  gmm.seed = result.seed;
  const Matrix<double> points = stack_rows(vectors);
  MixtureModel<double> model = fit_gmm(points, gmm);
  const HardAssignment<double> assignment = assign(model, points);
  try {
    result.clusters = cluster_mass(model, assignment, usable, config.soft_mass);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroMass) return skip(SkipReason::ZeroMass);
    throw;
  }
  result.model = std::move(model);

  const std::span<const WordVector> normalizers =
      config.zc_over == ZcOver::Choices ? std::span<const WordVector>(choices)
                                        : std::span<const WordVector>(vectors);
  try {
    double conf_a = 0.0;
    double conf_b = 0.0;
    for (const auto& cluster : result.clusters) {
      const double mass = config.mass == MassMode::Normalized ? cluster.mass : cluster.raw_mass;
      conf_a += differential_distance(cluster.center, choices[0], normalizers) * mass;
      conf_b += differential_distance(cluster.center, choices[1], normalizers) * mass;
    }
    result.conf_a = conf_a;
    result.conf_b = conf_b;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateGeometry || e.code() == ErrorCode::DegenerateVector) {
      result.clusters.clear();
      return skip(SkipReason::DegenerateGeometry);
    }
    throw;
  }
  result.predicted = result.conf_a >= result.conf_b ? Choice::A : Choice::B;
  result.correct = result.predicted == result.gold;
  result.margin = std::abs(result.conf_a - result.conf_b);
  return result;
}

GroupStats group_stats(std::string label, std::vector<double> values) {
  GroupStats g;
  g.label = std::move(label);
  g.count = values.size();
  if (!values.empty()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    g.min = sorted.front();
    g.max = sorted.back();
    g.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    g.mean = sum / static_cast<double>(n);
  }
  g.values = std::move(values);
  return g;
}

ViolinSummary summarize_confidences(std::span<const ConfidenceResult> results) {
  std::vector<double> wrong_predicted;
  std::vector<double> wrong_gold;
  std::vector<double> right_predicted;
  for (const auto& r : results) {
    if (r.skipped) continue;
    if (r.correct) {
      right_predicted.push_back(r.conf(r.predicted));
    } else {
      wrong_predicted.push_back(r.conf(r.predicted));
      wrong_gold.push_back(r.conf(r.gold));
    }
  }
  return ViolinSummary{{group_stats("incorrect_predicted_label", std::move(wrong_predicted)),
                        group_stats("incorrect_correct_label", std::move(wrong_gold)),
                        group_stats("correct_predicted_label", std::move(right_predicted))}};
}

}  // namespace csprobe
