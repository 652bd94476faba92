#include <doctest.h>

#include <algorithm>
#include <random>

#include "csprobe/confidence.hpp"
#include "test_support.hpp"

using namespace csprobe;
using namespace csprobe::testing;

namespace {

ChoicePair make_pair(std::string a, std::string b, Choice gold, std::string id = "p") {
  ChoicePair p;
  p.id = std::move(id);
  p.shared_masked_tokens = {"x", "<mask>"};
  p.diff_index = 1;
  p.choice_a = std::move(a);
  p.choice_b = std::move(b);
  p.gold = gold;
  return p;
}

// Two tight groups of candidates, one around 20 degrees and one around 110.
struct Scene {
  EmbeddingTable table;
  std::vector<Replacement> candidates;
};

Scene two_group_scene(double mass_near_b, double mass_near_a) {
  std::vector<std::pair<std::string, WordVector>> e{{"apple", polar(0)}, {"stone", polar(120)}};
  std::vector<Replacement> c;
  for (int i = 0; i < 4; ++i) {
    e.emplace_back("b" + std::to_string(i), polar(118 + i, 1.0 + 0.1 * i));
    c.push_back({"b" + std::to_string(i), mass_near_b / 4});
    e.emplace_back("a" + std::to_string(i), polar(2 + i, 0.9 + 0.1 * i));
    c.push_back({"a" + std::to_string(i), mass_near_a / 4});
  }
  return {table(e), c};
}

}  // namespace

TEST_CASE("differential distance examples") {
  // Distances 0.2 and 0.6 from the center.
  const WordVector c = vec({1, 0});
  const WordVector w1 = polar(std::acos(0.8) * 180 / M_PI);
  const WordVector w2 = polar(std::acos(0.4) * 180 / M_PI);
  const std::vector<WordVector> both{w1, w2};
  CHECK(std::abs(differential_distance(c, w1, both) - 0.75) <= 1e-12);
  CHECK(std::abs(differential_distance(c, w2, both) - 0.25) <= 1e-12);

  const WordVector half = polar(60);  // distance 0.5
  const std::vector<WordVector> boundary{c, half};
  CHECK(differential_distance(c, c, boundary) == 1.0);
  CHECK(std::abs(differential_distance(c, half, boundary)) <= 1e-15);

  const std::vector<WordVector> sym{polar(30), polar(-30)};
  CHECK(std::abs(differential_distance(c, sym[0], sym) - 0.5) <= 1e-15);
  CHECK(std::abs(differential_distance(c, sym[1], sym) - 0.5) <= 1e-15);

  const std::vector<WordVector> same{c, c};
  CHECK(thrown_code([&] { (void)differential_distance(c, c, same); }) == ErrorCode::DegenerateGeometry);
}

TEST_CASE("cluster mass examples") {
  MixtureModel<double> m;
  m.weights = vec({0.5, 0.5});
  m.means = Matrix<double>::Zero(2, 2);
  m.variances = Matrix<double>::Ones(2, 2);
  HardAssignment<double> a;
  a.labels = {0, 0, 1};
  a.responsibilities = Matrix<double>::Zero(3, 2);
  const std::vector<Replacement> cands{{"w", 0.4}, {"w'", 0.1}, {"w''", 0.2}};
  const auto clusters = cluster_mass(m, a, cands);
  REQUIRE(clusters.size() == 2);
  CHECK(std::abs(clusters[0].raw_mass - 0.5) <= 1e-15);
  CHECK(std::abs(clusters[1].raw_mass - 0.2) <= 1e-15);
  CHECK(std::abs(clusters[0].mass - 5.0 / 7.0) <= 1e-15);
  CHECK(std::abs(clusters[1].mass - 2.0 / 7.0) <= 1e-15);
  CHECK(clusters[0].members.size() == 2);

  a.labels = {1, 1, 1};
  const auto all_one = cluster_mass(m, a, cands);
  CHECK(all_one[0].mass == 0.0);
  CHECK(all_one[1].mass == 1.0);

  a.labels = {0, 1, 1};
  const std::vector<Replacement> uniform{{"a", 0.1}, {"b", 0.1}, {"c", 0.1}};
  const auto prop = cluster_mass(m, a, uniform);
  CHECK(std::abs(prop[0].mass - 1.0 / 3.0) <= 1e-15);
  CHECK(std::abs(prop[1].mass - 2.0 / 3.0) <= 1e-15);

  const std::vector<Replacement> zero{{"a", 0.0}, {"b", 0.0}, {"c", 0.0}};
  CHECK(thrown_code([&] { (void)cluster_mass(m, a, zero); }) == ErrorCode::ZeroMass);

  a.responsibilities << 0.5, 0.5, 0.0, 1.0, 0.25, 0.75;
  const auto soft = cluster_mass(m, a, cands, true);
  CHECK(std::abs(soft[0].raw_mass - (0.2 + 0.05)) <= 1e-15);
  CHECK(std::abs(soft[1].raw_mass - (0.2 + 0.1 + 0.15)) <= 1e-15);
}

TEST_CASE("confidence is the mass-weighted sum of differential distances") {
  // Masses (0.7, 0.3) with dD(c1, a) = 0.75 and dD(c2, a) = 0.4.
  const double conf_a = 0.75 * 0.7 + 0.4 * 0.3;
  const double conf_b = 0.25 * 0.7 + 0.6 * 0.3;
  CHECK(std::abs(conf_a - 0.645) <= 1e-15);
  CHECK(std::abs(conf_b - 0.355) <= 1e-15);
  CHECK(conf_a > conf_b);
}

TEST_CASE("candidates packed around choice b predict b") {
  const Scene s = two_group_scene(0.6, 0.05);
  const auto r = score_pair(make_pair("apple", "stone", Choice::B), ReplacementSet::create(s.candidates),
                            s.table, ConfidenceConfig{});
  REQUIRE_FALSE(r.skipped);
  CHECK(r.predicted == Choice::B);
  CHECK(r.correct);
  CHECK(r.conf_b > 0.5);
  CHECK(std::abs(r.conf_a + r.conf_b - 1.0) <= 1e-9);
  CHECK(r.margin == doctest::Approx(std::abs(r.conf_a - r.conf_b)));
  REQUIRE(r.model);
  CHECK(r.clusters.size() == 2);
  CHECK(r.seed == derive_seed(0, "p"));

  // The same scene with the answer key flipped is scored incorrect.
  const auto wrong = score_pair(make_pair("apple", "stone", Choice::A),
                                ReplacementSet::create(s.candidates), s.table, ConfidenceConfig{});
  CHECK_FALSE(wrong.correct);
  CHECK(wrong.conf_a == r.conf_a);
}

TEST_CASE("swapping the choices swaps the confidences") {
  const Scene s = two_group_scene(0.3, 0.4);
  const auto rs = ReplacementSet::create(s.candidates);
  const auto ab = score_pair(make_pair("apple", "stone", Choice::A), rs, s.table, ConfidenceConfig{});
  const auto ba = score_pair(make_pair("stone", "apple", Choice::B), rs, s.table, ConfidenceConfig{});
  CHECK(ab.conf_a == ba.conf_b);
  CHECK(ab.conf_b == ba.conf_a);
  CHECK(ab.correct == ba.correct);
}

TEST_CASE("candidate order does not change confidences") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> angle(0, 360), radius(0.5, 1.5), prob(0.005, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::string, WordVector>> e{{"a", polar(angle(rng))}, {"b", polar(angle(rng))}};
    std::vector<Replacement> c;
    for (int i = 0; i < 10; ++i) {
      e.emplace_back("c" + std::to_string(i), polar(angle(rng), radius(rng)));
      c.push_back({"c" + std::to_string(i), prob(rng)});
    }
    const auto t = table(e);
    const auto pair = make_pair("a", "b", Choice::A, "q" + std::to_string(trial));
    const auto base = score_pair(pair, ReplacementSet::create(c), t, ConfidenceConfig{});
    std::shuffle(c.begin(), c.end(), rng);
    const auto again = score_pair(pair, ReplacementSet::create(c), t, ConfidenceConfig{});
    if (base.skipped) {
      CHECK(again.skipped == base.skipped);
      continue;
    }
    CHECK(std::abs(base.conf_a - again.conf_a) <= 1e-9);
    CHECK(std::abs(base.conf_a + base.conf_b - 1.0) <= 1e-9);
    CHECK(base.conf_a >= 0.0);
    CHECK(base.conf_a <= 1.0);
  }
}

TEST_CASE("pairs are skipped with a reason") {
  const Scene s = two_group_scene(0.3, 0.3);
  const ConfidenceConfig cfg;
  auto reason = [&](const ChoicePair& p, std::vector<Replacement> c) {
    return score_pair(p, ReplacementSet::create(std::move(c)), s.table, cfg).skipped;
  };
  CHECK(reason(make_pair("apple", "stone", Choice::A), {}) == SkipReason::NoCandidates);
  CHECK(reason(make_pair("apple", "blorft", Choice::A), s.candidates) == SkipReason::ChoiceOov);
  CHECK(reason(make_pair("apple", "stone", Choice::A), {{"zz", 0.3}, {"yy", 0.2}}) ==
        SkipReason::AllCandidatesOov);
  CHECK(reason(make_pair("apple", "stone", Choice::A), {{"zz", 0.3}, {"a1", 0.2}}) ==
        SkipReason::TooFewCandidates);
  CHECK(reason(make_pair("apple", "stone", Choice::A), {{"a1", 0.0}, {"b1", 0.0}}) == SkipReason::ZeroMass);
  CHECK(reason(make_pair("apple", "apple", Choice::A), {{"apple", 0.3}, {"apple", 0.2}}) ==
        SkipReason::DegenerateGeometry);
  const auto counted = score_pair(make_pair("apple", "stone", Choice::A),
                                  ReplacementSet::create({{"zz", 0.3}, {"a1", 0.2}}), s.table, cfg);
  CHECK(counted.candidates_total == 2);
  CHECK(counted.candidates_oov == 1);
}

TEST_CASE("alternative normalizer and raw masses") {
  const Scene s = two_group_scene(0.4, 0.2);
  const auto rs = ReplacementSet::create(s.candidates);
  ConfidenceConfig raw;
  raw.mass = MassMode::Raw;
  const auto r = score_pair(make_pair("apple", "stone", Choice::B), rs, s.table, raw);
  CHECK(std::abs(r.conf_a + r.conf_b - 0.6) <= 1e-9);
  ConfidenceConfig cand;
  cand.zc_over = ZcOver::Candidates;
  const auto c = score_pair(make_pair("apple", "stone", Choice::B), rs, s.table, cand);
  REQUIRE_FALSE(c.skipped);
  CHECK(c.predicted == Choice::B);
}

TEST_CASE("violin summary") {
  auto result = [](double conf_a, Choice gold) {
    ConfidenceResult r;
    r.conf_a = conf_a;
    r.conf_b = 1.0 - conf_a;
    r.predicted = conf_a >= r.conf_b ? Choice::A : Choice::B;
    r.gold = gold;
    r.correct = r.predicted == gold;
    return r;
  };
  const std::vector<ConfidenceResult> one{result(0.6, Choice::A)};
  const auto v1 = summarize_confidences(one);
  CHECK(v1.groups[2].count == 1);
  CHECK(*v1.groups[2].min == 0.6);
  CHECK(*v1.groups[2].max == 0.6);
  CHECK(*v1.groups[2].median == 0.6);
  CHECK(v1.groups[0].count == 0);
  CHECK_FALSE(v1.groups[0].median);
  CHECK_FALSE(v1.groups[1].mean);

  std::vector<ConfidenceResult> mixed{result(0.7, Choice::B), result(0.2, Choice::A),
                                      result(0.55, Choice::B), result(0.9, Choice::A)};
  ConfidenceResult skipped = result(0.99, Choice::B);
  skipped.skipped = SkipReason::ChoiceOov;
  mixed.push_back(skipped);
  const auto v = summarize_confidences(mixed);
  CHECK(v.groups[0].label == "incorrect_predicted_label");
  CHECK(v.groups[1].label == "incorrect_correct_label");
  CHECK(v.groups[2].label == "correct_predicted_label");
  CHECK(v.groups[0].count == 3);
  CHECK(std::abs(*v.groups[1].median - (1.0 - *v.groups[0].median)) <= 1e-15);
  CHECK(*v.groups[0].median == 0.7);
  CHECK(*v.groups[0].min == 0.55);
  CHECK(*v.groups[0].max == 0.8);
  CHECK(v.groups[2].count == 1);

  const auto even = group_stats("g", {4.0, 1.0, 3.0, 2.0});
  CHECK(*even.median == 2.5);
  CHECK(*even.mean == 2.5);
}
