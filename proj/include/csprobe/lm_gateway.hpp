#pragma once

// The masked-LM boundary. The core asks a CandidateProvider for the top-k
// fillers of a masked sentence; providers either replay a candidate fixture
// file or call a fill-mask HTTP endpoint.
//
// Fixture file: one JSON object per line,
//   {"request_id": "...", "masked_text": "...", "model_name": "...",
//    "candidates": [{"word": "...", "p": 0.12}, ...]}
//
// Wire protocol: POST <base_url>/fill with {"masked_text": "...", "top_k": N};
// the reply is {"model_name": "...", "candidates": [{"word", "p"}, ...]}.

#include <chrono>
#include <cstddef>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "csprobe/dispersion.hpp"

namespace csprobe {

struct CandidateRequest {
  std::string masked_text;
  std::string request_id;
  std::size_t top_k = 5;
};

/// Throws InvalidInput unless `masked_text` holds exactly one mask sentinel
/// and top_k is positive.
void validate_request(const CandidateRequest& request);

enum class ProviderKind { Fixture, Http };

std::string_view to_string(ProviderKind k) noexcept;

struct CandidateRecord {
  std::string request_id;
  std::string masked_text;
  std::string model_name;
  ReplacementSet candidates;
  ProviderKind provider = ProviderKind::Fixture;
  /// Transport attempts used to obtain the record (1 for fixtures).
  std::size_t attempts = 1;
};

using LogSink = std::function<void(const std::string&)>;

/// Writes to std::cerr.
LogSink stderr_sink();

class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  /// Safe to call concurrently.
  virtual CandidateRecord get(const CandidateRequest& request) const = 0;
};

class FixtureProvider final : public CandidateProvider {
 public:
  /// Duplicate request ids: the last record wins and `log` receives a warning.
  static FixtureProvider load(std::istream& in, const LogSink& log = stderr_sink());
  static FixtureProvider open(const std::string& path, const LogSink& log = stderr_sink());

  CandidateRecord get(const CandidateRequest& request) const override;

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::unordered_map<std::string, CandidateRecord> records_;
  std::vector<std::string> warnings_;
};

struct HttpOptions {
  std::string base_url;
  std::chrono::milliseconds timeout{10000};
  /// Extra attempts after a transport failure.
  std::size_t retries = 2;
  std::chrono::milliseconds backoff{50};
  std::size_t max_in_flight = 4;
  LogSink log = stderr_sink();
};

class HttpProvider final : public CandidateProvider {
 public:
  explicit HttpProvider(HttpOptions options);
  ~HttpProvider() override;
  HttpProvider(const HttpProvider&) = delete;
  HttpProvider& operator=(const HttpProvider&) = delete;

  CandidateRecord get(const CandidateRequest& request) const override;

 private:
  struct State;
  HttpOptions options_;
  std::string host_;
  std::string path_;
  std::unique_ptr<State> state_;
};

// Record (de)serialization shared by fixtures and the wire protocol.

/// One fixture line (no trailing newline).
std::string format_fixture_record(const CandidateRecord& record);
void write_fixture_record(std::ostream& out, const CandidateRecord& record);
/// Throws ParseError tagged with `line_no` on malformed input.
CandidateRecord parse_fixture_record(std::string_view line, std::size_t line_no);

/// Validates a fill-mask reply body; throws Error(Protocol) on any violation.
CandidateRecord parse_fill_response(std::string_view body, const CandidateRequest& request);

}  // namespace csprobe
