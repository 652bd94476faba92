#include <doctest.h>

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "csprobe/lm_gateway.hpp"
#include "test_support.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen internals.
#include <httplib.h>
#include <json.hpp>

using namespace csprobe;
using namespace csprobe::testing;
using namespace std::chrono_literals;

namespace {

const char* kFiveCandidates =
    R"({"model_name":"toy","candidates":[{"word":"scars","p":0.3},{"word":"tattoos","p":0.2},)"
    R"({"word":"spots","p":0.1},{"word":"scales","p":0.05},{"word":"hair","p":0.04}]})";

// Fill-mask endpoint on an ephemeral local port, served from a background thread.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/fill", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() { server_.stop(); }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

HttpOptions options(const std::string& url, std::vector<std::string>* log = nullptr) {
  HttpOptions o;
  o.base_url = url;
  o.timeout = 2000ms;
  o.retries = 2;
  o.backoff = 1ms;
  o.log = [log](const std::string& m) {
    if (log) log->push_back(m);
  };
  return o;
}

const CandidateRequest kRequest{"Leopards have <mask> on their bodies.", "s02:2", 5};

}  // namespace

TEST_CASE("requests need exactly one mask and a positive top_k") {
  CHECK_FALSE(thrown_code([] { validate_request(kRequest); }));
  CHECK(thrown_code([] { validate_request({"no mask here", "x", 5}); }) == ErrorCode::InvalidInput);
  CHECK(thrown_code([] { validate_request({"<mask> and <mask>", "x", 5}); }) == ErrorCode::InvalidInput);
  CHECK(thrown_code([] { validate_request({"a <mask>", "x", 0}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("fixture provider truncates to top_k") {
  std::istringstream in(
      R"({"request_id":"s1:2","masked_text":"a <mask> b","model_name":"m","candidates":[)"
      R"({"word":"e","p":0.05},{"word":"a","p":0.3},{"word":"b","p":0.2},{"word":"c","p":0.1},{"word":"d","p":0.08}]})"
      "\n");
  const auto fx = FixtureProvider::load(in);
  const auto rec = fx.get({"a <mask> b", "s1:2", 3});
  REQUIRE(rec.candidates.size() == 3);
  CHECK(rec.candidates.items()[0].word == "a");
  CHECK(rec.candidates.items()[2].word == "c");
  CHECK(rec.provider == ProviderKind::Fixture);
  CHECK(rec.model_name == "m");
  CHECK(fx.get({"a <mask> b", "s1:2", 30}).candidates.size() == 5);
  CHECK(thrown_code([&] { (void)fx.get({"a <mask> b", "s9:9", 3}); }) == ErrorCode::MissingFixture);
}

TEST_CASE("fixture duplicates keep the last record and warn") {
  std::istringstream in(
      R"({"request_id":"x","masked_text":"<mask>","model_name":"m","candidates":[{"word":"old","p":0.5}]})"
      "\n\n"
      R"({"request_id":"x","masked_text":"<mask>","model_name":"m","candidates":[{"word":"new","p":0.5}]})"
      "\n");
  std::vector<std::string> log;
  const auto fx = FixtureProvider::load(in, [&](const std::string& m) { log.push_back(m); });
  CHECK(fx.size() == 1);
  CHECK(fx.get({"<mask>", "x", 5}).candidates.items()[0].word == "new");
  CHECK(log.size() == 1);
  CHECK(fx.warnings().size() == 1);
}

TEST_CASE("malformed fixture lines report their line number") {
  const char* bad[] = {
      "{not json",
      R"({"masked_text":"<mask>","model_name":"m","candidates":[]})",
      R"({"request_id":"x","masked_text":"<mask>","model_name":"m","candidates":[{"word":"a","p":-0.1}]})",
      R"({"request_id":"x","masked_text":"<mask>","model_name":"m","candidates":[{"word":"a b","p":0.1}]})",
      R"({"request_id":"x","masked_text":"<mask>","model_name":"m"})",
  };
  for (const char* line : bad) {
    std::istringstream in(std::string(R"({"request_id":"ok","masked_text":"<mask>","model_name":"m","candidates":[]})") +
                          "\n" + line + "\n");
    try {
      (void)FixtureProvider::load(in);
      FAIL("expected a parse error for " << line);
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("fixture records round-trip") {
  CandidateRecord r;
  r.request_id = "p01";
  r.masked_text = "She eats some <mask> everyday.";
  r.model_name = "toy-fixture@abc123";
  r.candidates = ReplacementSet::create({{"rice", 0.10916}, {"apples", 0.1 / 3.0}, {"mud", 1e-9}});
  std::ostringstream out;
  write_fixture_record(out, r);
  write_fixture_record(out, r);
  const std::string text = out.str();
  const auto back = parse_fixture_record(text.substr(0, text.find('\n')), 1);
  CHECK(back.request_id == r.request_id);
  CHECK(back.masked_text == r.masked_text);
  CHECK(back.model_name == r.model_name);
  REQUIRE(back.candidates.size() == r.candidates.size());
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    CHECK(back.candidates.items()[i].word == r.candidates.items()[i].word);
    CHECK(std::abs(back.candidates.items()[i].p - r.candidates.items()[i].p) <= 1e-12);
  }
}

TEST_CASE("the bundled candidate fixtures load cleanly") {
  for (const char* name : {"fixtures/candidates_cloze.jsonl", "fixtures/candidates_pairs.jsonl"}) {
    std::vector<std::string> log;
    const auto fx = FixtureProvider::open(data_path(name), [&](const std::string& m) { log.push_back(m); });
    CHECK(fx.size() > 0);
    CHECK(log.empty());
  }
  CHECK(thrown_code([] { (void)FixtureProvider::open(data_path("fixtures/absent.jsonl")); }) ==
        ErrorCode::Io);
}

TEST_CASE("fill responses are validated") {
  const auto ok = parse_fill_response(kFiveCandidates, kRequest);
  CHECK(ok.candidates.size() == 5);
  CHECK(ok.provider == ProviderKind::Http);
  CHECK(parse_fill_response(kFiveCandidates, {kRequest.masked_text, "r", 2}).candidates.size() == 2);
  for (const char* body : {
           R"({"model_name":"m","candidates":[{"word":"a","p":-0.1}]})",
           R"({"model_name":"m","candidates":[{"word":"a","p":0.7},{"word":"b","p":0.4}]})",
           R"({"candidates":[{"word":"a","p":0.1}]})",
           R"({"model_name":"m"})",
           R"({"model_name":"m","candidates":[{"p":0.1}]})",
           R"({"model_name":"m","candidates":[{"word":"a"}]})",
           R"([1,2])",
           "garbage",
       }) {
    CHECK_MESSAGE(thrown_code([&] { (void)parse_fill_response(body, kRequest); }) == ErrorCode::Protocol,
                  body);
  }
}

TEST_CASE("HTTP provider round trip") {
  nlohmann::json seen;
  FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    res.set_content(kFiveCandidates, "application/json");
  });
  HttpProvider http(options(ep.url()));
  const auto rec = http.get(kRequest);
  CHECK(rec.candidates.size() == 5);
  CHECK(rec.model_name == "toy");
  CHECK(rec.request_id == "s02:2");
  CHECK(rec.attempts == 1);
  CHECK(seen["masked_text"] == kRequest.masked_text);
  CHECK(seen["top_k"] == 5);
}

TEST_CASE("HTTP provider maps bad replies to protocol and remote errors") {
  std::atomic<int> mode{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (mode == 0) {
      res.set_content(R"({"model_name":"m","candidates":[{"word":"a","p":-0.1}]})", "application/json");
    } else {
      res.status = 503;
      res.set_content("busy", "text/plain");
    }
  });
  HttpProvider http(options(ep.url()));
  CHECK(thrown_code([&] { (void)http.get(kRequest); }) == ErrorCode::Protocol);
  mode = 1;
  try {
    (void)http.get(kRequest);
    FAIL("expected a remote error");
  } catch (const RemoteError& e) {
    CHECK(e.status() == 503);
  }
}

TEST_CASE("HTTP provider retries after a timeout") {
  std::atomic<int> calls{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) std::this_thread::sleep_for(600ms);
    res.set_content(kFiveCandidates, "application/json");
  });
  std::vector<std::string> log;
  auto o = options(ep.url(), &log);
  o.timeout = 200ms;
  HttpProvider http(o);
  const auto rec = http.get(kRequest);
  CHECK(rec.attempts == 2);
  CHECK(rec.candidates.size() == 5);
  REQUIRE(log.size() == 2);
  CHECK(log.back().find("after 1 retries") != std::string::npos);
}

TEST_CASE("HTTP provider gives up with a transport error") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  std::vector<std::string> log;
  auto o = options("http://127.0.0.1:" + std::to_string(port), &log);
  o.timeout = 100ms;
  HttpProvider http(o);
  CHECK(thrown_code([&] { (void)http.get(kRequest); }) == ErrorCode::Transport);
  CHECK(log.size() == 2);
  CHECK(thrown_code([] { HttpProvider bad(options("ftp://x")); }) == ErrorCode::Config);
}

TEST_CASE("HTTP provider handles concurrent callers") {
  std::atomic<int> active{0}, peak{0};
  FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(20ms);
    --active;
    const auto j = nlohmann::json::parse(req.body);
    res.set_content(nlohmann::json{{"model_name", j["masked_text"]},
                                   {"candidates", {{{"word", "w"}, {"p", 0.5}}}}}
                        .dump(),
                    "application/json");
  });
  auto o = options(ep.url());
  o.max_in_flight = 2;
  HttpProvider http(o);
  std::vector<std::jthread> callers;
  std::vector<std::string> got(8);
  for (int i = 0; i < 8; ++i) {
    callers.emplace_back([&, i] {
      got[static_cast<std::size_t>(i)] =
          http.get({"q" + std::to_string(i) + " <mask>", std::to_string(i), 1}).model_name;
    });
  }
  callers.clear();
  for (int i = 0; i < 8; ++i) CHECK(got[static_cast<std::size_t>(i)] == "q" + std::to_string(i) + " <mask>");
  CHECK(peak.load() <= 2);
}
