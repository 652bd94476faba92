#include "csprobe/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "csprobe/eval.hpp"
#include "csprobe/report.hpp"

namespace csprobe {

namespace {

struct CliOptions {
  RunConfig run;
  std::size_t dim = 0;
  long long timeout_ms = 10000;
};

void add_common(CLI::App& sub, CliOptions& o) {
  sub.add_option("--embeddings", o.run.embeddings_path, "GloVe text embeddings")
      ->required()
      ->check(CLI::ExistingFile);
  sub.add_option("--dim", o.dim, "Expected embedding dimension (default: from first line)");
  sub.add_option("--dataset", o.run.dataset_path, "Tab-separated dataset")
      ->required()
      ->check(CLI::ExistingFile);
  sub.add_option("--fixture", o.run.fixture_path, "Candidate fixture (JSONL)");
  sub.add_option("--lm-url", o.run.lm_url, "Fill-mask endpoint base URL (env CS_PROBE_LM_URL)");
  sub.add_option("--lm-timeout-ms", o.timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
  sub.add_option("--lm-retries", o.run.lm_retries, "Retries after a transport failure");
  sub.add_option("--seed", o.run.seed, "Base random seed");
  sub.add_option("--out", o.run.out_dir, "Output directory")->required();
  sub.add_option("--workers", o.run.workers, "Worker threads")->check(CLI::PositiveNumber);
}

const std::map<std::string, ZcOver> kZcOver{{"choices", ZcOver::Choices},
                                            {"candidates", ZcOver::Candidates}};
const std::map<std::string, MassMode> kMass{{"normalized", MassMode::Normalized},
                                            {"raw", MassMode::Raw}};

std::unique_ptr<CandidateProvider> make_provider(RunConfig& run, std::ostream& err) {
  if (run.fixture_path.empty() && run.lm_url.empty()) {
    if (const char* env = std::getenv("CS_PROBE_LM_URL"); env != nullptr && *env != '\0') {
      run.lm_url = env;
    }
  }
  if (!run.fixture_path.empty() && !run.lm_url.empty()) {
    throw Error(ErrorCode::Config, "configure exactly one of --fixture and --lm-url");
  }
  LogSink log = [&err](const std::string& msg) { err << "warning: " << msg << '\n'; };
  if (!run.fixture_path.empty()) {
    return std::make_unique<FixtureProvider>(FixtureProvider::open(run.fixture_path, log));
  }
  if (!run.lm_url.empty()) {
    HttpOptions opt;
    opt.base_url = run.lm_url;
    opt.timeout = run.lm_timeout;
    opt.retries = run.lm_retries;
    opt.max_in_flight = std::max<std::size_t>(4, run.workers);
    opt.log = log;
    return std::make_unique<HttpProvider>(std::move(opt));
  }
  throw Error(ErrorCode::Config, "no LM provider: pass --fixture, --lm-url or set CS_PROBE_LM_URL");
}

EmbeddingTable load_table(const RunConfig& run) {
  std::ifstream in(run.embeddings_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open embeddings '" + run.embeddings_path + "'");
  return EmbeddingTable::load(in, run.dim);
}

template <typename Reader>
auto load_dataset(const std::string& path, Reader&& reader) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset '" + path + "'");
  return reader(in);
}

StopwordSet load_stopwords(const std::string& path) {
  if (path.empty()) return StopwordSet::bundled();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open stopword list '" + path + "'");
  return StopwordSet::load(in);
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message, int code) {
  err << nlohmann::json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
      << '\n';
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return kExitConfig;
    case ErrorCode::Internal: return kExitInternal;
    default: return kExitData;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cloze-test probes of a masked language model's common sense"};
  app.name("cs-probe");
  app.require_subcommand(1);

  CliOptions o;
  auto* cloze = app.add_subcommand("cloze-eval", "Accuracy/precision dispersion over sentences");
  add_common(*cloze, o);
  cloze->add_option("--k", o.run.k, "Replacements per mask")->check(CLI::PositiveNumber);
  cloze->add_option("--stopwords", o.run.stopwords_path, "Stopword list, one per line")
      ->check(CLI::ExistingFile);

  auto* conf = app.add_subcommand("confidence-eval", "Cluster-weighted two-choice confidence");
  add_common(*conf, o);
  conf->add_option("--candidates-k", o.run.candidates_k, "LM candidates clustered per pair")
      ->check(CLI::PositiveNumber);
  conf->add_option("--components", o.run.n_components, "Mixture components")
      ->check(CLI::PositiveNumber);
  conf->add_option("--gmm-restarts", o.run.gmm_restarts, "Mixture initializations")
      ->check(CLI::PositiveNumber);
  conf->add_option("--max-iter", o.run.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  conf->add_option("--tol", o.run.tol, "EM relative tolerance")->check(CLI::PositiveNumber);
  conf->add_option("--variance-floor", o.run.variance_floor, "Minimum component variance")
      ->check(CLI::PositiveNumber);
  std::string zc_over = "choices";
  std::string mass = "normalized";
  conf->add_option("--zc-over", zc_over, "Distance normalizer: choices|candidates")
      ->check(CLI::IsMember({"choices", "candidates"}));
  conf->add_option("--mass", mass, "Cluster mass weighting: normalized|raw")
      ->check(CLI::IsMember({"normalized", "raw"}));
  conf->add_flag("--soft-mass", o.run.soft_mass, "Responsibility-weighted cluster masses");

  auto* report = app.add_subcommand("report", "Re-derive aggregates and print report tables");
  std::string report_dir;
  report->add_option("--out", report_dir, "Directory holding run artifacts")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << '\n';
      return kExitOk;
    }
    report_error(err, to_string(ErrorCode::Config), e.what(), kExitConfig);
    return kExitConfig;
  }

  try {
    RunConfig& run = o.run;
    if (o.dim > 0) run.dim = o.dim;
    run.zc_over = kZcOver.at(zc_over);
    run.mass = kMass.at(mass);
    run.lm_timeout = std::chrono::milliseconds(o.timeout_ms);
    if (*report) {
      out << render_report(report_dir);
      return kExitOk;
    }
    if (*cloze) {
      run.command = "cloze-eval";
      const auto provider = make_provider(run, err);
      const EmbeddingTable table = load_table(run);
      const auto dataset = load_dataset(run.dataset_path, [](std::istream& in) {
        return read_sentence_dataset(in);
      });
      const StopwordSet stopwords = load_stopwords(run.stopwords_path);
      const auto artifacts = run_cloze_eval(run, dataset, *provider, table, stopwords);
      emit_report(artifacts, run.out_dir);
      std::size_t masks = 0;
      for (const auto& s : artifacts.sentences) masks += s.masks.size();
      out << "cloze-eval: " << artifacts.sentences.size() << " sentences, " << masks
          << " masks -> " << run.out_dir << '\n';
      return kExitOk;
    }
    run.command = "confidence-eval";
    const auto provider = make_provider(run, err);
    const EmbeddingTable table = load_table(run);
    const auto dataset = load_dataset(run.dataset_path, [](std::istream& in) {
      return read_pair_dataset(in);
    });
    const auto artifacts = run_confidence_eval(run, dataset, *provider, table);
    emit_report(artifacts, run.out_dir);
    const auto& a = artifacts.accounting;
    out << "confidence-eval: " << a.dataset_size << " pairs, " << a.encodable << " encodable, "
        << a.correct << " correct, " << a.incorrect << " incorrect, " << a.skipped
        << " skipped -> " << run.out_dir << '\n';
    return kExitOk;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(err, to_string(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(err, to_string(ErrorCode::Internal), e.what(), kExitInternal);
    return kExitInternal;
  }
}

}  // namespace csprobe
