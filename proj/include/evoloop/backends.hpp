// Copyright 2026 The evoloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "evoloop/corpus.hpp"
#include "evoloop/error.hpp"
#include "json.hpp"

namespace evoloop {

/// Environment variable that roots every workspace-relative URI.
inline constexpr const char* kWorkspaceEnv = "EVOLOOP_WORKSPACE";

/// Clips longer than this inject noise into SMT inputs; they are flagged.
inline constexpr double kMaxSpeechDurationS = 30.0;

struct EndpointConfig {
  std::string base_url;
  double timeout_s = 60.0;
  int max_attempts = 3;
  int backoff_base_ms = 200;
  int max_in_flight = 8;
  std::string bearer_token;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Retry and bounded batches

/// Upper bound of the jittered sleep before retry number `attempt` (1-based).
std::chrono::milliseconds backoff_cap(const EndpointConfig& endpoint, int attempt);

/// Runs `fn` until it succeeds, throws a non-retryable error, or
/// max_attempts is exhausted. Sleeps uniform[0, backoff_cap] between tries.
template <typename F>
auto retry_call(F&& fn, const EndpointConfig& endpoint, std::uint64_t jitter_seed, int& attempts)
    -> decltype(fn()) {
  std::mt19937_64 rng(jitter_seed);
  attempts = 0;
  for (;;) {
    ++attempts;
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempts >= endpoint.max_attempts) throw;
    }
    const auto cap = backoff_cap(endpoint, attempts).count();
    std::uniform_int_distribution<long long> jitter(0, cap);
    std::this_thread::sleep_for(std::chrono::milliseconds(jitter(rng)));
  }
}

template <typename T>
struct BatchOutcome {
  std::optional<T> value;
  std::optional<Error> error;
  int attempts = 0;

  bool ok() const noexcept { return value.has_value(); }
};

/// Executes fn over `requests` with at most endpoint.max_in_flight calls in
/// flight, retrying each item per retry_call. Results come back in input
/// order. Per-item failures are carried in the outcomes; the batch itself
/// throws Error(Interrupted) only when `cancel` is raised.
template <typename Req, typename Fn>
auto batch(const std::vector<Req>& requests, Fn&& fn, const EndpointConfig& endpoint,
           const std::atomic<bool>* cancel = nullptr)
    -> std::vector<BatchOutcome<std::decay_t<decltype(fn(requests.front()))>>> {
  using Res = std::decay_t<decltype(fn(requests.front()))>;
  std::vector<BatchOutcome<Res>> out(requests.size());
  if (requests.empty()) return out;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (cancel && cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      auto& slot = out[i];
      try {
        slot.value.emplace(retry_call([&] { return fn(requests[i]); }, endpoint, i + 1, slot.attempts));
      } catch (const Error& e) {
        slot.error.emplace(e);
      } catch (const std::exception& e) {
        slot.error.emplace(Errc::BackendProtocol, e.what());
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(requests.size(), static_cast<std::size_t>(std::max(1, endpoint.max_in_flight)));
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();  // joins

  if (cancel && cancel->load()) throw Error(Errc::Interrupted, "batch cancelled");
  return out;
}

// ---------------------------------------------------------------------------
// Wire transport

/// POSTs a JSON body to an endpoint path and returns the decoded 2xx body.
/// Non-2xx responses surface as Error: 5xx/429 and connection failures as
/// BackendUnavailable, 4xx as the code named in the {error, detail} body.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual nlohmann::json post(std::string_view path, const nlohmann::json& body) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(EndpointConfig endpoint);
  nlohmann::json post(std::string_view path, const nlohmann::json& body) override;

 private:
  EndpointConfig endpoint_;
};

/// Maps an {error, detail} body and HTTP status to a library error.
Error error_from_response(int status, std::string_view body);

/// The inverse used by servers: status code plus {error, detail} body.
std::pair<int, nlohmann::json> response_from_error(const Error& e);

// ---------------------------------------------------------------------------
// Content-addressed cache

/// Single-writer, multi-reader JSON store under <root>/<namespace>/ keyed by
/// SHA-256. Commits are write-temp-then-rename.
class ContentCache {
 public:
  explicit ContentCache(std::filesystem::path root);

  static std::string key_for(std::string_view ns, std::string_view revision, const nlohmann::ordered_json& request);

  std::optional<nlohmann::json> get(std::string_view ns, std::string_view key) const;
  void put(std::string_view ns, std::string_view key, const nlohmann::json& value);
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path path_for(std::string_view ns, std::string_view key) const;
  std::filesystem::path root_;
  mutable std::atomic<std::uint64_t> tmp_counter_{0};
};

struct ClientStats {
  std::size_t requests = 0;    // transport calls, including retries
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

/// Shared plumbing for the three clients: cache lookup, transport call,
/// accounting.
class ServiceClient {
 public:
  ServiceClient(std::shared_ptr<Transport> transport, EndpointConfig endpoint, std::shared_ptr<ContentCache> cache,
                std::string revision);

  const EndpointConfig& endpoint() const noexcept { return endpoint_; }
  const std::string& revision() const noexcept { return revision_; }
  ClientStats stats() const noexcept;
  void reset_stats() noexcept;

 protected:
  /// Returns the cached response for `request`, or calls the transport and
  /// caches the result. `valid` may veto a cached entry (treated as a miss).
  nlohmann::json cached_post(std::string_view ns, std::string_view path, const nlohmann::ordered_json& request,
                             const std::function<bool(const nlohmann::json&)>& valid = {});

 private:
  std::shared_ptr<Transport> transport_;
  EndpointConfig endpoint_;
  std::shared_ptr<ContentCache> cache_;
  std::string revision_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// ---------------------------------------------------------------------------
// TTS

struct SynthesisRequest {
  std::string text;
  std::string voice_id;
  std::optional<double> target_duration_s;
};

struct SynthesisResult {
  AudioRef audio;
  bool overrun = false;  // duration_s > kMaxSpeechDurationS
};

nlohmann::ordered_json to_wire(const SynthesisRequest& req);

class TtsClient : public ServiceClient {
 public:
  /// `workspace` resolves returned URIs when validating cache entries.
  TtsClient(std::shared_ptr<Transport> transport, EndpointConfig endpoint, std::shared_ptr<ContentCache> cache,
            std::string revision, std::filesystem::path workspace);

  /// One transport attempt (or cache hit). Overruns are reported, not thrown.
  SynthesisResult synthesize_once(const SynthesisRequest& req);

  /// Retries per the endpoint; throws DurationOverrun for clips over 30 s.
  AudioRef synthesize(const SynthesisRequest& req);

 private:
  std::filesystem::path workspace_;
};

// ---------------------------------------------------------------------------
// Translator

enum class TranslateMode { MT, SMT };

std::string_view to_string(TranslateMode mode) noexcept;

struct DecodeConfig {
  int beam = 1;
  double temperature = 0.0;

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

/// Every translation request uses greedy decoding.
inline constexpr DecodeConfig kEngineDecode{};

struct Hypothesis {
  TranslateMode mode = TranslateMode::MT;
  std::string text;
  DecodeConfig decode = kEngineDecode;
};

struct TranslationRequest {
  TranslateMode mode = TranslateMode::MT;
  std::string text;
  std::optional<AudioRef> audio;
  Direction direction;
};

nlohmann::ordered_json to_wire(const TranslationRequest& req);

class TranslatorClient : public ServiceClient {
 public:
  using ServiceClient::ServiceClient;

  /// Throws ModeAudioMismatch before any I/O when the mode and audio
  /// presence disagree; EmptyTranslation for blank output.
  Hypothesis translate_once(const TranslationRequest& req);
  Hypothesis translate(const TranslationRequest& req);
};

// ---------------------------------------------------------------------------
// Scorer

struct ScoreRequest {
  std::string source;
  std::string hypothesis;
  std::string reference;
};

struct ScoreTriple {
  std::string source;
  std::string hypothesis;
  std::string reference;
  double score = 0.0;
};

nlohmann::ordered_json to_wire(const ScoreRequest& req);

class ScorerClient : public ServiceClient {
 public:
  using ServiceClient::ServiceClient;

  /// Score in [0,1]; ScoreOutOfRange otherwise (never cached).
  double score_once(const ScoreRequest& req);
  double score(const ScoreRequest& req);
};

// ---------------------------------------------------------------------------
// In-process mocks
//
// Each mock is a pure function of its request and configuration and speaks
// the same JSON protocol as the HTTP services.

/// Writes 16 kHz mono PCM16 silent WAV stubs under <workspace>/audio/.
/// duration_s = target_duration_s when given, else char_len / 15.
class MockTts {
 public:
  struct Options {
    std::filesystem::path workspace;
    std::set<std::string> voices;  // empty accepts any voice
    double chars_per_second = 15.0;
    std::optional<double> forced_duration_s;
  };

  explicit MockTts(Options opts);
  nlohmann::json handle(const nlohmann::json& request) const;

 private:
  Options opts_;
};

/// Translation = lexicon[lexicon_key(tgt, text)], else lexicon[text], else
/// the text itself (echo). With drop_last_token_in_mt, MT output loses its
/// final whitespace token.
class MockTranslator {
 public:
  struct Options {
    std::filesystem::path workspace;  // SMT audio must exist when set
    std::map<std::string, std::string> lexicon;
    bool drop_last_token_in_mt = false;
  };

  explicit MockTranslator(Options opts);
  nlohmann::json handle(const nlohmann::json& request) const;

  /// "<tgt_lang>\t<text>", so one source sentence can map per target.
  static std::string lexicon_key(std::string_view tgt_lang, std::string_view text);

 private:
  Options opts_;
};

/// Harmonic token-F1 of hypothesis vs reference (source ignored),
/// multiplied by `scale`. `constant` short-circuits to a fixed value.
class MockScorer {
 public:
  struct Options {
    double scale = 1.0;
    std::optional<double> constant;
  };

  explicit MockScorer(Options opts);
  nlohmann::json handle(const nlohmann::json& request) const;

  static double token_f1(std::string_view hypothesis, std::string_view reference);

 private:
  Options opts_;
};

/// Routes /v1/tts, /v1/translate, /v1/score to the configured mocks and
/// counts requests per path.
class MockTransport final : public Transport {
 public:
  MockTransport(std::shared_ptr<const MockTts> tts, std::shared_ptr<const MockTranslator> translator,
                std::shared_ptr<const MockScorer> scorer);
  nlohmann::json post(std::string_view path, const nlohmann::json& body) override;

  std::size_t requests(std::string_view path) const;
  std::size_t total_requests() const;

 private:
  std::shared_ptr<const MockTts> tts_;
  std::shared_ptr<const MockTranslator> translator_;
  std::shared_ptr<const MockScorer> scorer_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t, std::less<>> counts_;
};

/// Writes a silent 16-bit mono WAV of the given duration.
void write_silent_wav(const std::filesystem::path& path, double duration_s, int sample_rate_hz);

/// Resolves the workspace: explicit value, else EVOLOOP_WORKSPACE, else ".".
std::filesystem::path resolve_workspace(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace evoloop
