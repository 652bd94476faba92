#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "csprobe/cli.hpp"
#include "csprobe/report.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace csprobe;
using namespace csprobe::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cs-probe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("csprobe-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
    return (path_ / name).string();
  }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kEmb = data_path("fixtures/embeddings_2d.txt");
const std::string kSentences = data_path("fixtures/sentences_10.tsv");
const std::string kPairs = data_path("fixtures/pairs_12.tsv");
const std::string kClozeFx = data_path("fixtures/candidates_cloze.jsonl");
const std::string kPairFx = data_path("fixtures/candidates_pairs.jsonl");

json error_of(const Outcome& o) { return json::parse(o.err.substr(o.err.rfind('{', o.err.find("\"error\"")))); }

}  // namespace

TEST_CASE("configuration problems exit with code 2") {
  TempDir tmp;
  SUBCASE("missing required flag") {
    const auto o = cli({"cloze-eval", "--embeddings", kEmb, "--out", tmp / "o"});
    CHECK(o.code == kExitConfig);
    CHECK(json::parse(o.err)["error"]["kind"] == "config_error");
    CHECK(json::parse(o.err)["error"]["exit_code"] == 2);
  }
  SUBCASE("unknown choice") {
    CHECK(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", kPairs, "--fixture", kPairFx,
               "--out", tmp / "o", "--zc-over", "everything"})
              .code == kExitConfig);
  }
  SUBCASE("two providers") {
    CHECK(cli({"cloze-eval", "--embeddings", kEmb, "--dataset", kSentences, "--fixture", kClozeFx,
               "--lm-url", "http://127.0.0.1:9", "--out", tmp / "o"})
              .code == kExitConfig);
  }
  SUBCASE("no provider") {
    unsetenv("CS_PROBE_LM_URL");
    CHECK(cli({"cloze-eval", "--embeddings", kEmb, "--dataset", kSentences, "--out", tmp / "o"}).code ==
          kExitConfig);
  }
  SUBCASE("no subcommand") { CHECK(cli({}).code == kExitConfig); }
}

TEST_CASE("help exits cleanly") {
  const auto o = cli({"--help"});
  CHECK(o.code == kExitOk);
  CHECK(o.out.find("cloze-eval") != std::string::npos);
}

TEST_CASE("data problems exit with code 3") {
  TempDir tmp;
  SUBCASE("malformed embeddings") {
    const auto emb = tmp.file("bad.txt", "cat 0.1 0.2\ndog 0.3\n");
    const auto o = cli({"cloze-eval", "--embeddings", emb, "--dataset", kSentences, "--fixture",
                        kClozeFx, "--out", tmp / "o"});
    CHECK(o.code == kExitData);
    CHECK(error_of(o)["error"]["kind"] == "parse_error");
    CHECK(error_of(o)["error"]["message"].get<std::string>().find("line 2") != std::string::npos);
  }
  SUBCASE("missing fixture record") {
    const auto ds = tmp.file("ds.tsv", "zz\tBirds sing loudly.\n");
    const auto o = cli({"cloze-eval", "--embeddings", kEmb, "--dataset", ds, "--fixture", kClozeFx,
                        "--out", tmp / "o"});
    CHECK(o.code == kExitData);
    CHECK(error_of(o)["error"]["kind"] == "missing_fixture");
  }
  SUBCASE("dimension mismatch") {
    const auto o = cli({"cloze-eval", "--embeddings", kEmb, "--dim", "50", "--dataset", kSentences,
                        "--fixture", kClozeFx, "--out", tmp / "o"});
    CHECK(o.code == kExitData);
    CHECK(error_of(o)["error"]["kind"] == "dimension_mismatch");
  }
  SUBCASE("bad gold label") {
    const auto ds = tmp.file("ds.tsv", "p1\tA b.\tA c.\tmaybe\n");
    CHECK(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", ds, "--fixture", kPairFx, "--out",
               tmp / "o"})
              .code == kExitData);
  }
}

TEST_CASE("an empty dataset produces empty reports") {
  TempDir tmp;
  const auto ds = tmp.file("empty.tsv", "");
  REQUIRE(cli({"cloze-eval", "--embeddings", kEmb, "--dataset", ds, "--fixture", kClozeFx, "--out",
               tmp / "c"})
              .code == kExitOk);
  CHECK(slurp(tmp / "c/cloze_masks.jsonl").empty());
  const auto summary = json::parse(slurp(tmp / "c/cloze_summary.json"));
  CHECK(summary["counts"]["sentences"] == 0);
  CHECK(summary["correlations"][0]["pearson_r"].is_null());

  REQUIRE(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", ds, "--fixture", kPairFx, "--out",
               tmp / "p"})
              .code == kExitOk);
  const auto conf = json::parse(slurp(tmp / "p/confidence_summary.json"));
  CHECK(conf["accounting"]["dataset_size"] == 0);
  CHECK(conf["accounting"]["accuracy"].is_null());
  CHECK(conf["accounting"]["skipped"]["total"] == 0);
  CHECK(cli({"report", "--out", tmp / "p"}).code == kExitOk);
}

TEST_CASE("identical sentences are all not encodable with a null accuracy") {
  TempDir tmp;
  const auto ds = tmp.file("same.tsv", "p1\tWater is wet.\tWater is wet.\ta\np2\tBirds fly.\tBirds fly.\tb\n");
  REQUIRE(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", ds, "--fixture", kPairFx, "--out",
               tmp / "o"})
              .code == kExitOk);
  const auto s = json::parse(slurp(tmp / "o/confidence_summary.json"));
  CHECK(s["accounting"]["not_encodable"]["total"] == 2);
  CHECK(s["accounting"]["not_encodable"]["by_reason"]["zero_diff"] == 2);
  CHECK(s["accounting"]["accuracy"].is_null());
  const auto plot = json::parse(slurp(tmp / "o/confidence_plot.json"));
  REQUIRE(plot["groups"].size() == 3);
  for (const auto& g : plot["groups"]) CHECK(g["values"].empty());
}

TEST_CASE("worker count does not change artifacts") {
  TempDir tmp;
  for (const char* w : {"1", "4"}) {
    REQUIRE(cli({"cloze-eval", "--embeddings", kEmb, "--dataset", kSentences, "--fixture", kClozeFx,
                 "--out", tmp / (std::string("c") + w), "--workers", w})
                .code == kExitOk);
    REQUIRE(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", kPairs, "--fixture", kPairFx,
                 "--out", tmp / (std::string("p") + w), "--workers", w})
                .code == kExitOk);
  }
  for (const char* f : {kClozeMasksFile, kClozeSentencesFile, kClozeSummaryFile}) {
    CHECK(slurp(tmp / (std::string("c1/") + f)) == slurp(tmp / (std::string("c4/") + f)));
  }
  for (const char* f : {kPairsFile, kConfidenceSummaryFile, kPlotFile}) {
    CHECK(slurp(tmp / (std::string("p1/") + f)) == slurp(tmp / (std::string("p4/") + f)));
  }
}

TEST_CASE("every artifact echoes the seed") {
  TempDir tmp;
  REQUIRE(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", kPairs, "--fixture", kPairFx,
               "--out", tmp / "o", "--seed", "123"})
              .code == kExitOk);
  const auto s = json::parse(slurp(tmp / "o/confidence_summary.json"));
  CHECK(s["seed"] == 123);
  CHECK(s["config"]["seed"] == 123);
  std::istringstream pairs(slurp(tmp / "o/confidence_pairs.jsonl"));
  std::string line;
  while (std::getline(pairs, line)) {
    const auto p = json::parse(line);
    if (p["status"] == "scored") CHECK(p["seed"] == derive_seed(123, p["pair_id"].get<std::string>()));
  }
}

TEST_CASE("report re-derives and rejects tampered summaries") {
  TempDir tmp;
  REQUIRE(cli({"confidence-eval", "--embeddings", kEmb, "--dataset", kPairs, "--fixture", kPairFx,
               "--out", tmp / "o"})
              .code == kExitOk);
  const auto ok = cli({"report", "--out", tmp / "o"});
  CHECK(ok.code == kExitOk);
  CHECK(slurp(tmp / "o/report.txt") == ok.out);

  auto s = json::parse(slurp(tmp / "o/confidence_summary.json"));
  s["accounting"]["correct"] = 99;
  tmp.file("o/confidence_summary.json", s.dump(2));
  const auto bad = cli({"report", "--out", tmp / "o"});
  CHECK(bad.code == kExitInternal);
  CHECK(error_of(bad)["error"]["kind"] == "internal_error");
  CHECK(cli({"report", "--out", tmp / "missing"}).code == kExitConfig);
}

TEST_CASE("the LM url falls back to the environment") {
  httplib::Server server;
  server.Post("/fill", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"model_name":"env","candidates":[{"word":"trees","p":0.4},{"word":"grass","p":0.2}]})",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::jthread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir tmp;
  const auto ds = tmp.file("ds.tsv", "s1\tBirds build nests.\n");
  setenv("CS_PROBE_LM_URL", ("http://127.0.0.1:" + std::to_string(port)).c_str(), 1);
  const auto o = cli({"cloze-eval", "--embeddings", kEmb, "--dataset", ds, "--out", tmp / "o"});
  unsetenv("CS_PROBE_LM_URL");
  server.stop();
  REQUIRE(o.code == kExitOk);
  const auto s = json::parse(slurp(tmp / "o/cloze_summary.json"));
  CHECK(s["config"]["provider"]["kind"] == "http");
  CHECK(s["counts"]["masks"] == 3);
}
