#include "csprobe/lm_gateway.hpp"

#include <fstream>
#include <iostream>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "csprobe/cloze.hpp"
#include "csprobe/error.hpp"

namespace csprobe {

using nlohmann::json;

namespace {

std::size_t count_masks(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(kMaskToken); pos != std::string_view::npos;
       pos = text.find(kMaskToken, pos + kMaskToken.size())) {
    ++n;
  }
  return n;
}

// Shared by the fixture parser and the wire protocol; `fail` must throw.
template <typename Fail>
ReplacementSet parse_candidates(const json& obj, Fail&& fail) {
  const auto it = obj.find("candidates");
  if (it == obj.end() || !it->is_array()) fail("missing 'candidates' array");
  std::vector<Replacement> items;
  items.reserve(it->size());
  for (const auto& c : *it) {
    if (!c.is_object()) fail("candidate is not an object");
    const auto w = c.find("word");
    const auto p = c.find("p");
    if (w == c.end() || !w->is_string()) fail("candidate without string 'word'");
    if (p == c.end() || !p->is_number()) fail("candidate without numeric 'p'");
    const auto word = w->get<std::string>();
    if (word.empty() || word.find_first_of(" \t\r\n") != std::string::npos) {
      fail("candidate word '" + word + "' is not a single token");
    }
    items.push_back({word, p->get<double>()});
  }
  try {
    return ReplacementSet::create(std::move(items));
  } catch (const Error& e) {
    fail(e.what());
  }
  return {};
}

std::string require_string(const json& obj, const char* key, const auto& fail) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) fail(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

json candidates_json(const ReplacementSet& set) {
  json arr = json::array();
  for (const auto& item : set) arr.push_back({{"word", item.word}, {"p", item.p}});
  return arr;
}

}  // namespace

void validate_request(const CandidateRequest& request) {
  if (request.top_k == 0) throw Error(ErrorCode::InvalidInput, "top_k must be positive");
  if (count_masks(request.masked_text) != 1) {
    throw Error(ErrorCode::InvalidInput, "request '" + request.request_id +
                                             "' must contain exactly one mask sentinel");
  }
}

std::string_view to_string(ProviderKind k) noexcept {
  return k == ProviderKind::Fixture ? "fixture" : "http";
}

LogSink stderr_sink() {
  return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

// ---------------------------------------------------------------------------
// Fixture records

std::string format_fixture_record(const CandidateRecord& record) {
  json j;
  j["request_id"] = record.request_id;
  j["masked_text"] = record.masked_text;
  j["model_name"] = record.model_name;
  j["candidates"] = candidates_json(record.candidates);
  return j.dump();
}

void write_fixture_record(std::ostream& out, const CandidateRecord& record) {
  out << format_fixture_record(record) << '\n';
}

CandidateRecord parse_fixture_record(std::string_view line, std::size_t line_no) {
  auto fail = [line_no](const std::string& msg) -> void { throw ParseError(line_no, msg); };
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) fail("invalid JSON");
  if (!j.is_object()) fail("record is not a JSON object");
  CandidateRecord record;
  record.request_id = require_string(j, "request_id", fail);
  record.masked_text = require_string(j, "masked_text", fail);
  record.model_name = require_string(j, "model_name", fail);
  record.candidates = parse_candidates(j, fail);
  record.provider = ProviderKind::Fixture;
  return record;
}

FixtureProvider FixtureProvider::load(std::istream& in, const LogSink& log) {
  FixtureProvider provider;
  std::unordered_map<std::string, std::size_t> seen_at;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CandidateRecord record = parse_fixture_record(line, line_no);
    if (const auto prev = seen_at.find(record.request_id); prev != seen_at.end()) {
      std::string msg = "line " + std::to_string(line_no) + ": duplicate request_id '" +
                        record.request_id + "' replaces line " + std::to_string(prev->second);
      if (log) log(msg);
      provider.warnings_.push_back(std::move(msg));
    }
    seen_at[record.request_id] = line_no;
    provider.records_[record.request_id] = std::move(record);
  }
  return provider;
}

FixtureProvider FixtureProvider::open(const std::string& path, const LogSink& log) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open candidate fixture '" + path + "'");
  return load(in, log);
}

CandidateRecord FixtureProvider::get(const CandidateRequest& request) const {
  validate_request(request);
  const auto it = records_.find(request.request_id);
  if (it == records_.end()) {
    throw Error(ErrorCode::MissingFixture,
                "no fixture record for request '" + request.request_id + "'");
  }
  CandidateRecord record = it->second;
  record.candidates = record.candidates.truncated(request.top_k);
  return record;
}

// ---------------------------------------------------------------------------
// HTTP

struct HttpProvider::State {
  explicit State(std::size_t limit) : slots(static_cast<std::ptrdiff_t>(limit)) {}
  mutable std::counting_semaphore<1024> slots;
};

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

}  // namespace

HttpProvider::HttpProvider(HttpOptions options) : options_(std::move(options)) {
  const auto scheme = options_.base_url.find("://");
  if (scheme == std::string::npos || options_.base_url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorCode::Config, "LM url must start with http://, got '" + options_.base_url + "'");
  }
  const auto slash = options_.base_url.find('/', scheme + 3);
  host_ = options_.base_url.substr(0, slash);
  path_ = slash == std::string::npos ? "" : options_.base_url.substr(slash);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/fill";
  if (options_.max_in_flight == 0 || options_.max_in_flight > 1024) {
    throw Error(ErrorCode::Config, "max in-flight requests must be in [1, 1024]");
  }
  state_ = std::make_unique<State>(options_.max_in_flight);
}

HttpProvider::~HttpProvider() = default;

CandidateRecord parse_fill_response(std::string_view body, const CandidateRequest& request) {
  auto fail = [&](const std::string& msg) -> void {
    throw Error(ErrorCode::Protocol, "response for '" + request.request_id + "': " + msg);
  };
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail("body is not a JSON object");
  CandidateRecord record;
  record.request_id = request.request_id;
  record.masked_text = request.masked_text;
  record.model_name = require_string(j, "model_name", fail);
  record.candidates = parse_candidates(j, fail).truncated(request.top_k);
  record.provider = ProviderKind::Http;
  return record;
}

CandidateRecord HttpProvider::get(const CandidateRequest& request) const {
  validate_request(request);
  const std::string body =
      json{{"masked_text", request.masked_text}, {"top_k", request.top_k}}.dump();
  SlotGuard slot(state_->slots);

  const std::size_t attempts = options_.retries + 1;
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(static_cast<time_t>(secs.count()),
                                  static_cast<time_t>(usecs.count()));
    client.set_read_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
    client.set_write_timeout(static_cast<time_t>(secs.count()),
                             static_cast<time_t>(usecs.count()));

    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      if (attempt < attempts) {
        if (options_.log) {
          options_.log("request '" + request.request_id + "' attempt " + std::to_string(attempt) +
                       " failed (" + last_error + "), retrying");
        }
        std::this_thread::sleep_for(options_.backoff * attempt);
      }
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw RemoteError(res->status, "LM endpoint returned status " +
                                         std::to_string(res->status) + " for '" +
                                         request.request_id + "'");
    }
    CandidateRecord record = parse_fill_response(res->body, request);
    record.attempts = attempt;
    if (attempt > 1 && options_.log) {
      options_.log("request '" + request.request_id + "' succeeded after " +
                   std::to_string(attempt - 1) + " retries");
    }
    return record;
  }
  throw Error(ErrorCode::Transport, "request '" + request.request_id + "' failed after " +
                                        std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace csprobe
