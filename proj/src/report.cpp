#include "csprobe/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace csprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_name(const std::string& path) {
  return path.empty() ? std::string() : fs::path(path).filename().string();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "cannot create output directory '" + dir.string() + "'");
  }
}

std::string jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(line_no, "invalid JSON in " + path.string());
    out.push_back(std::move(j));
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::Parse, "invalid JSON in " + path.string());
  return j;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_opt(const json& v) { return v.is_null() ? "    -   " : fmt("%8.4f", v.get<double>()); }

std::string clip(std::string s, std::size_t width) {
  if (s.size() > width) s = s.substr(0, width - 3) + "...";
  return s;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void require_equal(const json& stored, const json& derived, const std::string& what) {
  if (stored != derived) {
    throw Error(ErrorCode::Internal, what + " in the summary does not match the per-item records");
  }
}

std::string render_cloze(const fs::path& dir) {
  const json summary = read_json(dir / kClozeSummaryFile);
  const auto sentences = read_jsonl(dir / kClozeSentencesFile);
  const auto masks = read_jsonl(dir / kClozeMasksFile);

  // Re-derive correlations from the sentence records.
  std::vector<SentenceResult> rebuilt;
  for (const auto& s : sentences) {
    SentenceResult r;
    r.report.length = s.at("length").get<std::size_t>();
    if (!s.at("acc").is_null()) {
      r.report.means = DispersionMeans{s.at("acc").get<double>(), s.at("prec").get<double>(),
                                       s.at("w_acc").get<double>(), s.at("w_prec").get<double>()};
    }
    rebuilt.push_back(std::move(r));
  }
  json derived = json::array();
  for (const auto& c : cloze_correlations(rebuilt)) derived.push_back(correlation_json(c));
  require_equal(summary.at("correlations"), derived, "correlations");
  require_equal(summary.at("counts").at("sentences"), json(sentences.size()), "sentence count");
  require_equal(summary.at("counts").at("masks"), json(masks.size()), "mask count");

  std::ostringstream out;
  const json& cfg = summary.at("config");
  out << "cloze-eval  seed " << summary.at("seed").dump() << "  k " << cfg.at("k").dump()
      << "  embeddings " << cfg.at("embeddings").get<std::string>() << "\n";
  const json& counts = summary.at("counts");
  out << "sentences " << counts.at("sentences").dump() << "  masks " << counts.at("masks").dump()
      << " (scored " << counts.at("masks_scored").dump() << ", excluded "
      << counts.at("masks_excluded").dump() << ")  replacements used "
      << counts.at("replacements_used").dump() << ", oov " << counts.at("replacements_oov").dump()
      << "\n\ncorrelations\n";
  for (const auto& c : summary.at("correlations")) {
    out << "  " << pad(c.at("x").get<std::string>() + " vs " + c.at("y").get<std::string>(), 18)
        << " r " << fmt_opt(c.at("pearson_r")) << "  n " << c.at("n").dump();
    if (!c.at("note").get<std::string>().empty()) out << "  (" << c.at("note").get<std::string>() << ")";
    out << "\n";
  }
  out << "\n" << pad("sentence", 44) << "     acc     prec    w_acc   w_prec\n";
  for (const auto& s : sentences) {
    out << pad(clip(s.at("sentence_id").get<std::string>() + "  " + s.at("text").get<std::string>(), 43), 44)
        << fmt_opt(s.at("acc")) << " " << fmt_opt(s.at("prec")) << " " << fmt_opt(s.at("w_acc"))
        << " " << fmt_opt(s.at("w_prec")) << "\n";
  }
  out << "\nper-mask replacements\n";
  for (const auto& m : masks) {
    out << "  " << pad(m.at("request_id").get<std::string>(), 10) << " "
        << pad(m.at("original").get<std::string>(), 14) << " acc " << fmt_opt(m.at("acc"))
        << "  |";
    for (const auto& r : m.at("replacements")) out << " " << r.at("word").get<std::string>();
    if (!m.at("error").is_null()) out << "  [" << m.at("error").at("kind").get<std::string>() << "]";
    out << "\n";
  }
  return out.str();
}

std::string render_confidence(const fs::path& dir) {
  const json summary = read_json(dir / kConfidenceSummaryFile);
  const auto pairs = read_jsonl(dir / kPairsFile);

  // Re-derive accounting and group statistics from the pair records.
  std::size_t encodable = 0, correct = 0, incorrect = 0, skipped = 0;
  std::vector<double> g1, g2, g3;
  for (const auto& p : pairs) {
    const std::string status = p.at("status").get<std::string>();
    if (status == "not_encodable") continue;
    ++encodable;
    if (status == "skipped") {
      ++skipped;
      continue;
    }
    const double conf_a = p.at("conf_a").get<double>();
    const double conf_b = p.at("conf_b").get<double>();
    const bool pred_a = p.at("predicted").get<std::string>() == "a";
    const bool gold_a = p.at("gold").get<std::string>() == "a";
    if (p.at("correct").get<bool>()) {
      ++correct;
      g3.push_back(pred_a ? conf_a : conf_b);
    } else {
      ++incorrect;
      g1.push_back(pred_a ? conf_a : conf_b);
      g2.push_back(gold_a ? conf_a : conf_b);
    }
  }
  const json& acct = summary.at("accounting");
  require_equal(acct.at("dataset_size"), json(pairs.size()), "dataset size");
  require_equal(acct.at("encodable"), json(encodable), "encodable count");
  require_equal(acct.at("correct"), json(correct), "correct count");
  require_equal(acct.at("incorrect"), json(incorrect), "incorrect count");
  require_equal(acct.at("skipped").at("total"), json(skipped), "skipped count");
  const ViolinSummary derived{{group_stats("incorrect_predicted_label", g1),
                               group_stats("incorrect_correct_label", g2),
                               group_stats("correct_predicted_label", g3)}};
  json derived_groups = json::array();
  for (const auto& g : derived.groups) derived_groups.push_back(group_stats_json(g));
  require_equal(summary.at("violin").at("groups"), derived_groups, "violin statistics");

  std::ostringstream out;
  const json& cfg = summary.at("config");
  out << "confidence-eval  seed " << summary.at("seed").dump() << "  candidates_k "
      << cfg.at("candidates_k").dump() << "  components " << cfg.at("n_components").dump()
      << "  zc_over " << cfg.at("zc_over").get<std::string>() << "  mass "
      << cfg.at("mass").get<std::string>() << "\n";
  out << "pairs " << acct.at("dataset_size").dump() << "  encodable " << encodable
      << "  not encodable " << acct.at("not_encodable").at("total").dump() << "\n";
  out << "scored " << acct.at("scored").dump() << "  correct " << correct << "  incorrect "
      << incorrect << "  skipped " << skipped << "\n";
  out << "accuracy " << (acct.at("accuracy").is_null() ? std::string("-")
                                                       : fmt("%.4f", acct.at("accuracy").get<double>()))
      << "\n\nnot encodable by reason\n";
  for (const auto& [k, v] : acct.at("not_encodable").at("by_reason").items()) {
    out << "  " << pad(k, 22) << v.dump() << "\n";
  }
  out << "skipped by reason\n";
  for (const auto& [k, v] : acct.at("skipped").at("by_reason").items()) {
    out << "  " << pad(k, 22) << v.dump() << "\n";
  }
  out << "\n" << pad("group", 28) << "   n      min   median      max     mean\n";
  for (const auto& g : summary.at("violin").at("groups")) {
    out << pad(g.at("label").get<std::string>(), 28) << fmt("%4.0f", g.at("count").get<double>())
        << " " << fmt_opt(g.at("min")) << " " << fmt_opt(g.at("median")) << " "
        << fmt_opt(g.at("max")) << " " << fmt_opt(g.at("mean")) << "\n";
  }
  out << "\n" << pad("pair", 10) << pad("choices", 26) << "gold pred   conf_a   conf_b\n";
  for (const auto& p : pairs) {
    out << pad(p.at("pair_id").get<std::string>(), 10);
    const std::string status = p.at("status").get<std::string>();
    if (status != "scored") {
      out << status << " (" << p.at("reason").get<std::string>() << ")\n";
      continue;
    }
    out << pad(p.at("choice_a").get<std::string>() + " / " + p.at("choice_b").get<std::string>(), 26)
        << pad(p.at("gold").get<std::string>(), 5) << pad(p.at("predicted").get<std::string>(), 3)
        << fmt_opt(p.at("conf_a")) << " " << fmt_opt(p.at("conf_b"))
        << (p.at("correct").get<bool>() ? "" : "  x") << "\n";
  }
  return out.str();
}

}  // namespace

json config_json(const RunConfig& c) {
  json provider;
  if (!c.fixture_path.empty()) {
    provider = {{"kind", "fixture"}, {"fixture", file_name(c.fixture_path)}};
  } else {
    provider = {{"kind", "http"}, {"url", c.lm_url}};
  }
  return {{"command", c.command},
          {"embeddings", file_name(c.embeddings_path)},
          {"dim", c.dim ? json(*c.dim) : json(nullptr)},
          {"dataset", file_name(c.dataset_path)},
          {"provider", provider},
          {"k", c.k},
          {"candidates_k", c.candidates_k},
          {"n_components", c.n_components},
          {"seed", c.seed},
          {"gmm_restarts", c.gmm_restarts},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"variance_floor", c.variance_floor},
          {"stopwords", c.stopwords_path.empty() ? "bundled" : file_name(c.stopwords_path)},
          {"zc_over", to_string(c.zc_over)},
          {"mass", to_string(c.mass)},
          {"soft_mass", c.soft_mass}};
}

json model_json(const MixtureModel<double>& m) {
  auto rows = [](const Matrix<double>& mat) {
    json out = json::array();
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      out.push_back(std::vector<double>(mat.row(r).begin(), mat.row(r).end()));
    }
    return out;
  };
  return {{"n_components", m.n_components()},
          {"weights", std::vector<double>(m.weights.begin(), m.weights.end())},
          {"means", rows(m.means)},
          {"variances", rows(m.variances)},
          {"log_likelihood", m.log_likelihood},
          {"log_likelihood_trace", m.log_likelihood_trace},
          {"seed", m.seed},
          {"iterations", m.iterations}};
}

json correlation_json(const CorrelationReport& c) {
  return {{"x", c.x}, {"y", c.y}, {"pearson_r", optional_json(c.pearson_r)}, {"n", c.n},
          {"note", c.note}};
}

json group_stats_json(const GroupStats& g) {
  return {{"label", g.label},       {"count", g.count},
          {"min", optional_json(g.min)}, {"max", optional_json(g.max)},
          {"median", optional_json(g.median)}, {"mean", optional_json(g.mean)}};
}

json mask_record_json(const std::string& sentence_id, const MaskRecord& mask) {
  json replacements = json::array();
  for (const auto& r : mask.replacements) replacements.push_back({{"word", r.word}, {"p", r.p}});
  const MaskScore& s = mask.score;
  json j = {{"sentence_id", sentence_id},
            {"mask_index", s.mask_index},
            {"request_id", mask.request_id},
            {"original", s.original},
            {"k", s.k},
            {"replacements", replacements}};
  if (s.scores) {
    j["acc"] = s.scores->acc;
    j["prec"] = s.scores->prec;
    j["w_acc"] = s.scores->w_acc;
    j["w_prec"] = s.scores->w_prec;
    j["used"] = s.scores->used;
    j["oov"] = s.scores->oov;
    j["error"] = nullptr;
  } else {
    for (const char* key : {"acc", "prec", "w_acc", "w_prec", "used", "oov"}) j[key] = nullptr;
    j["error"] = {{"kind", s.error ? std::string(to_string(*s.error)) : std::string("unknown")},
                  {"message", s.error_message}};
  }
  return j;
}

json sentence_record_json(const SentenceResult& sentence) {
  const SentenceReport& r = sentence.report;
  json j = {{"sentence_id", r.sentence_id},   {"text", sentence.text},
            {"length", r.length},             {"masks", r.per_mask.size()},
            {"scored_masks", r.scored_masks}, {"excluded_masks", r.excluded_masks}};
  j["acc"] = r.means ? json(r.means->acc) : json(nullptr);
  j["prec"] = r.means ? json(r.means->prec) : json(nullptr);
  j["w_acc"] = r.means ? json(r.means->w_acc) : json(nullptr);
  j["w_prec"] = r.means ? json(r.means->w_prec) : json(nullptr);
  return j;
}

json cloze_summary_json(const ClozeEvalArtifacts& a) {
  std::size_t masks = 0, scored = 0, excluded = 0, used = 0, oov = 0, no_means = 0;
  std::map<std::string, std::size_t> errors;
  for (const auto& s : a.sentences) {
    masks += s.report.per_mask.size();
    scored += s.report.scored_masks;
    excluded += s.report.excluded_masks;
    if (!s.report.means) ++no_means;
    for (const auto& m : s.report.per_mask) {
      if (m.scores) {
        used += m.scores->used;
        oov += m.scores->oov;
      } else if (m.error) {
        ++errors[std::string(to_string(*m.error))];
      }
    }
  }
  json correlations = json::array();
  for (const auto& c : a.correlations) correlations.push_back(correlation_json(c));
  return {{"command", "cloze-eval"},
          {"seed", a.config.seed},
          {"config", config_json(a.config)},
          {"definitions",
           {{"length", "token count of the sentence, stopwords and punctuation included"},
            {"score", "sentence mean of acc over scored masks"}}},
          {"counts",
           {{"sentences", a.sentences.size()},
            {"sentences_without_scores", no_means},
            {"masks", masks},
            {"masks_scored", scored},
            {"masks_excluded", excluded},
            {"excluded_by_error", errors},
            {"replacements_used", used},
            {"replacements_oov", oov}}},
          {"correlations", correlations}};
}

json pair_record_json(const PairOutcome& o) {
  json j = {{"pair_id", o.pair_id}};
  if (o.not_encodable) {
    j["status"] = "not_encodable";
    j["reason"] = to_string(*o.not_encodable);
    return j;
  }
  const ChoicePair& pair = *o.pair;
  const ConfidenceResult& r = *o.result;
  j["status"] = r.skipped ? "skipped" : "scored";
  j["reason"] = r.skipped ? json(to_string(*r.skipped)) : json(nullptr);
  j["choice_a"] = pair.choice_a;
  j["choice_b"] = pair.choice_b;
  j["gold"] = to_string(pair.gold);
  j["diff_index"] = pair.diff_index;
  j["masked_text"] = o.masked_text;
  j["seed"] = r.seed;
  j["candidates"] = r.candidates_total;
  j["candidates_oov"] = r.candidates_oov;
  if (r.skipped) {
    for (const char* key : {"conf_a", "conf_b", "predicted", "correct", "margin", "model"}) {
      j[key] = nullptr;
    }
    j["clusters"] = json::array();
    return j;
  }
  j["conf_a"] = r.conf_a;
  j["conf_b"] = r.conf_b;
  j["predicted"] = to_string(r.predicted);
  j["correct"] = r.correct;
  j["margin"] = r.margin;
  json clusters = json::array();
  for (const auto& c : r.clusters) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back({{"word", m.word}, {"p", m.p}});
    clusters.push_back({{"center", std::vector<double>(c.center.begin(), c.center.end())},
                        {"raw_mass", c.raw_mass},
                        {"mass", c.mass},
                        {"members", members}});
  }
  j["clusters"] = clusters;
  j["model"] = r.model ? model_json(*r.model) : json(nullptr);
  return j;
}

json confidence_summary_json(const ConfidenceEvalArtifacts& a) {
  const ConfidenceAccounting& acct = a.accounting;
  json groups = json::array();
  for (const auto& g : a.violin.groups) groups.push_back(group_stats_json(g));
  return {{"command", "confidence-eval"},
          {"seed", a.config.seed},
          {"config", config_json(a.config)},
          {"accounting",
           {{"dataset_size", acct.dataset_size},
            {"encodable", acct.encodable},
            {"not_encodable", {{"total", acct.not_encodable}, {"by_reason", acct.not_encodable_by_reason}}},
            {"scored", acct.scored},
            {"correct", acct.correct},
            {"incorrect", acct.incorrect},
            {"skipped", {{"total", acct.skipped}, {"by_reason", acct.skipped_by_reason}}},
            {"accuracy", optional_json(acct.accuracy)}}},
          {"violin", {{"groups", groups}}}};
}

json plot_data_json(const ViolinSummary& violin) {
  json groups = json::array();
  for (const auto& g : violin.groups) groups.push_back({{"label", g.label}, {"values", g.values}});
  return {{"groups", groups}};
}

std::vector<fs::path> emit_report(const ClozeEvalArtifacts& a, const fs::path& dir) {
  prepare_dir(dir);
  std::vector<json> masks, sentences;
  for (const auto& s : a.sentences) {
    for (const auto& m : s.masks) masks.push_back(mask_record_json(s.report.sentence_id, m));
    sentences.push_back(sentence_record_json(s));
  }
  const std::vector<fs::path> files{dir / kClozeMasksFile, dir / kClozeSentencesFile,
                                    dir / kClozeSummaryFile};
  write_text(files[0], jsonl(masks));
  write_text(files[1], jsonl(sentences));
  write_text(files[2], cloze_summary_json(a).dump(2) + "\n");
  return files;
}

std::vector<fs::path> emit_report(const ConfidenceEvalArtifacts& a, const fs::path& dir) {
  prepare_dir(dir);
  std::vector<json> pairs;
  for (const auto& p : a.pairs) pairs.push_back(pair_record_json(p));
  const std::vector<fs::path> files{dir / kPairsFile, dir / kConfidenceSummaryFile,
                                    dir / kPlotFile};
  write_text(files[0], jsonl(pairs));
  write_text(files[1], confidence_summary_json(a).dump(2) + "\n");
  write_text(files[2], plot_data_json(a.violin).dump(2) + "\n");
  return files;
}

std::string render_report(const fs::path& dir) {
  const bool cloze = fs::exists(dir / kClozeSummaryFile);
  const bool confidence = fs::exists(dir / kConfidenceSummaryFile);
  if (!cloze && !confidence) {
    throw Error(ErrorCode::Io, "no run summaries found in '" + dir.string() + "'");
  }
  std::string text;
  if (cloze) text += render_cloze(dir);
  if (cloze && confidence) text += "\n";
  if (confidence) text += render_confidence(dir);
  write_text(dir / kReportFile, text);
  return text;
}

}  // namespace csprobe
