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

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "evoloop/backends.hpp"
#include "evoloop/error.hpp"
#include "oracles.hpp"

namespace evoloop {
namespace {

using nlohmann::json;

class FakeTransport final : public Transport {
 public:
  explicit FakeTransport(std::function<json(std::string_view, const json&)> fn) : fn_(std::move(fn)) {}
  json post(std::string_view path, const json& body) override {
    ++calls;
    return fn_(path, body);
  }
  std::atomic<int> calls{0};

 private:
  std::function<json(std::string_view, const json&)> fn_;
};

EndpointConfig fast_endpoint(int attempts = 3, int in_flight = 4) {
  return {.base_url = "fake://", .timeout_s = 1.0, .max_attempts = attempts, .backoff_base_ms = 1,
          .max_in_flight = in_flight, .bearer_token = {}};
}

TEST(Endpoint, ValidateRejectsNonsense) {
  EXPECT_NO_THROW(fast_endpoint().validate());
  auto bad = fast_endpoint();
  bad.max_in_flight = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = fast_endpoint();
  bad.max_attempts = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Retry, BackoffCapDoubles) {
  const EndpointConfig e{.base_url = "x", .timeout_s = 1, .max_attempts = 3, .backoff_base_ms = 200,
                         .max_in_flight = 1, .bearer_token = {}};
  EXPECT_EQ(backoff_cap(e, 1).count(), 400);
  EXPECT_EQ(backoff_cap(e, 2).count(), 800);
  EXPECT_EQ(backoff_cap(e, 3).count(), 1600);
}

TEST(Retry, RetriesOnlyRetryableErrors) {
  int calls = 0;
  int attempts = 0;
  const int v = retry_call(
      [&] {
        if (++calls < 3) throw Error(Errc::BackendUnavailable, "503");
        return 7;
      },
      fast_endpoint(), 1, attempts);
  EXPECT_EQ(v, 7);
  EXPECT_EQ(attempts, 3);

  calls = 0;
  EXPECT_THROW(retry_call([&]() -> int { ++calls; throw Error(Errc::BackendProtocol, "bad"); }, fast_endpoint(), 1,
                          attempts),
               Error);
  EXPECT_EQ(calls, 1);

  calls = 0;
  EXPECT_THROW(retry_call([&]() -> int { ++calls; throw Error(Errc::BackendUnavailable, "down"); },
                          fast_endpoint(4), 1, attempts),
               Error);
  EXPECT_EQ(calls, 4);
}

TEST(Batch, OrderAndConcurrencyBoundOverManyTrials) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int in_flight = 1 + static_cast<int>(rng() % 6);
    const std::size_t n = rng() % 24;
    std::vector<int> reqs(n);
    for (std::size_t i = 0; i < n; ++i) reqs[i] = static_cast<int>(i);
    std::atomic<int> live{0};
    std::atomic<int> peak{0};
    const std::uint64_t salt = rng();
    const auto out = batch(
        reqs,
        [&](int x) {
          const int now = ++live;
          int seen = peak.load();
          while (now > seen && !peak.compare_exchange_weak(seen, now)) {
          }
          if ((salt >> (x % 60)) & 1U) std::this_thread::yield();
          --live;
          if (x % 7 == 3) throw Error(Errc::ScoreOutOfRange, "odd one");
          return x * 10;
        },
        fast_endpoint(1, in_flight));
    ASSERT_EQ(out.size(), n);
    ASSERT_LE(peak.load(), in_flight);
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 7 == 3) {
        ASSERT_FALSE(out[i].ok());
        ASSERT_EQ(out[i].error->code(), Errc::ScoreOutOfRange);
      } else {
        ASSERT_EQ(*out[i].value, static_cast<int>(i) * 10);
      }
    }
  }
}

TEST(Batch, RetriesTransientFailuresPerItem) {
  std::vector<std::atomic<int>> tries(16);
  std::vector<int> reqs(16);
  for (int i = 0; i < 16; ++i) reqs[static_cast<std::size_t>(i)] = i;
  const auto out = batch(
      reqs,
      [&](int x) {
        if (++tries[static_cast<std::size_t>(x)] < 2) throw Error(Errc::BackendUnavailable, "flaky");
        return x;
      },
      fast_endpoint(3, 8));
  for (const auto& o : out) {
    ASSERT_TRUE(o.ok());
    EXPECT_EQ(o.attempts, 2);
  }
}

TEST(Batch, CancellationRaisesInterrupted) {
  std::atomic<bool> cancel{true};
  const std::vector<int> reqs{1, 2, 3};
  try {
    batch(reqs, [](int x) { return x; }, fast_endpoint(), &cancel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Interrupted);
  }
}

TEST(Cache, KeysAreContentAddressed) {
  nlohmann::ordered_json a{{"text", "hi"}, {"voice_id", "v"}};
  nlohmann::ordered_json b{{"text", "hi"}, {"voice_id", "w"}};
  EXPECT_EQ(ContentCache::key_for("tts", "r1", a), ContentCache::key_for("tts", "r1", a));
  EXPECT_NE(ContentCache::key_for("tts", "r1", a), ContentCache::key_for("tts", "r1", b));
  EXPECT_NE(ContentCache::key_for("tts", "r1", a), ContentCache::key_for("tts", "r2", a));
  EXPECT_NE(ContentCache::key_for("tts", "r1", a), ContentCache::key_for("score", "r1", a));
  EXPECT_EQ(ContentCache::key_for("tts", "r1", a),
            testing::oracle_sha256_hex(R"({"ns":"tts","rev":"r1","req":{"text":"hi","voice_id":"v"}})"));
}

TEST(Cache, PutThenGet) {
  testing::TempDir dir;
  ContentCache cache(dir.path());
  EXPECT_FALSE(cache.get("score", "ab12"));
  cache.put("score", "ab12", json{{"score", 0.5}});
  ASSERT_TRUE(cache.get("score", "ab12"));
  EXPECT_EQ((*cache.get("score", "ab12"))["score"], 0.5);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "score" / "ab" / "ab12.json"));
}

struct ClientFixture : ::testing::Test {
  testing::TempDir dir;
  std::shared_ptr<ContentCache> cache = std::make_shared<ContentCache>(dir.path() / "cache");
};

TEST_F(ClientFixture, ScorerCachesOnlyValidScores) {
  double next = 0.75;
  auto transport = std::make_shared<FakeTransport>([&](std::string_view, const json&) { return json{{"score", next}}; });
  ScorerClient scorer(transport, fast_endpoint(), cache, "m1");
  const ScoreRequest req{"src", "hyp", "ref"};
  EXPECT_EQ(scorer.score_once(req), 0.75);
  EXPECT_EQ(scorer.score_once(req), 0.75);
  EXPECT_EQ(transport->calls, 1);
  EXPECT_EQ(scorer.stats().cache_hits, 1U);

  next = 1.5;
  const ScoreRequest other{"src", "other", "ref"};
  EXPECT_THROW(scorer.score_once(other), Error);
  EXPECT_THROW(scorer.score_once(other), Error);
  EXPECT_EQ(transport->calls, 3);
  next = 0.2;
  EXPECT_EQ(scorer.score_once(other), 0.2);
}

TEST_F(ClientFixture, ScorerRejectsEmptyFields) {
  auto transport = std::make_shared<FakeTransport>([](std::string_view, const json&) { return json{{"score", 0.5}}; });
  ScorerClient scorer(transport, fast_endpoint(), cache, "m1");
  EXPECT_THROW(scorer.score_once({"", "h", "r"}), Error);
  EXPECT_EQ(transport->calls, 0);
}

TEST_F(ClientFixture, TranslatorModeAudioCheckedBeforeIo) {
  auto transport = std::make_shared<FakeTransport>([](std::string_view, const json&) { return json{{"text", "x"}}; });
  TranslatorClient tr(transport, fast_endpoint(), cache, "m1");
  const AudioRef audio{"a.wav", 1.0, 16000, AudioOrigin::Synthetic, "v"};
  for (const auto& bad : {TranslationRequest{TranslateMode::SMT, "hi", std::nullopt, {"eng", "fra"}},
                          TranslationRequest{TranslateMode::MT, "hi", audio, {"eng", "fra"}}}) {
    try {
      tr.translate_once(bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::ModeAudioMismatch);
    }
  }
  EXPECT_EQ(transport->calls, 0);
}

TEST_F(ClientFixture, TranslatorSendsGreedyDecodeAndRejectsEmptyOutput) {
  json seen;
  std::string reply = "  ";
  auto transport = std::make_shared<FakeTransport>([&](std::string_view path, const json& body) {
    EXPECT_EQ(path, "/v1/translate");
    seen = body;
    return json{{"text", reply}};
  });
  TranslatorClient tr(transport, fast_endpoint(), cache, "m1");
  const TranslationRequest req{TranslateMode::MT, "hello", std::nullopt, {"eng", "khm"}};
  try {
    tr.translate_once(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyTranslation);
  }
  EXPECT_EQ(seen["beam"], 1);
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["mode"], "mt");
  EXPECT_FALSE(seen.contains("audio_uri"));
  reply = "ok";
  EXPECT_EQ(tr.translate_once(req).text, "ok");
  EXPECT_EQ(transport->calls, 2);
}

TEST_F(ClientFixture, TtsOverrunFlaggedAndThrownBySynthesize) {
  auto mock = std::make_shared<MockTts>(MockTts::Options{.workspace = dir.path(), .voices = {"v"},
                                                          .chars_per_second = 15.0, .forced_duration_s = 31.0});
  auto transport = std::make_shared<MockTransport>(mock, nullptr, nullptr);
  TtsClient tts(transport, fast_endpoint(), cache, "t", dir.path());
  const SynthesisRequest req{"hello there", "v", std::nullopt};
  const auto once = tts.synthesize_once(req);
  EXPECT_TRUE(once.overrun);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / once.audio.uri));
  try {
    tts.synthesize(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DurationOverrun);
  }
}

TEST_F(ClientFixture, TtsDurationFollowsTargetOrCharRate) {
  auto mock = std::make_shared<MockTts>(MockTts::Options{.workspace = dir.path(), .voices = {},
                                                          .chars_per_second = 15.0, .forced_duration_s = {}});
  auto transport = std::make_shared<MockTransport>(mock, nullptr, nullptr);
  TtsClient tts(transport, fast_endpoint(), cache, "t", dir.path());
  EXPECT_DOUBLE_EQ(tts.synthesize({std::string(30, 'a'), "v", std::nullopt}).duration_s, 2.0);
  EXPECT_DOUBLE_EQ(tts.synthesize({"abc", "v", 4.5}).duration_s, 4.5);
  // A cache entry whose audio vanished is a miss.
  const auto first = tts.synthesize({"again", "v", std::nullopt});
  std::filesystem::remove(dir.path() / first.uri);
  tts.synthesize({"again", "v", std::nullopt});
  EXPECT_EQ(transport->requests("/v1/tts"), 4U);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / first.uri));
}

TEST(MockTtsVoices, UnknownVoiceRejected) {
  testing::TempDir dir;
  MockTts tts({.workspace = dir.path(), .voices = {"a"}, .chars_per_second = 15.0, .forced_duration_s = {}});
  try {
    tts.handle({{"text", "x"}, {"voice_id", "b"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SynthesisRejected);
  }
}

TEST(MockScorerF1, MatchesOracle) {
  std::mt19937_64 rng(8);
  const char* words[] = {"a", "b", "c", "d"};
  for (int t = 0; t < 500; ++t) {
    auto sentence = [&] {
      std::string s;
      for (std::size_t i = rng() % 6; i > 0; --i) s += std::string(words[rng() % 4]) + " ";
      return s;
    };
    const std::string h = sentence();
    const std::string r = sentence();
    ASSERT_NEAR(MockScorer::token_f1(h, r), testing::oracle_token_f1(h, r), 1e-12) << h << "|" << r;
  }
}

TEST(MockTranslatorLexicon, PerTargetThenTextThenEcho) {
  MockTranslator tr({.workspace = {},
                     .lexicon = {{MockTranslator::lexicon_key("khm", "hi"), "k1 k2"}, {"hi", "generic"}},
                     .drop_last_token_in_mt = true});
  auto ask = [&](std::string tgt, std::string mode) {
    json req{{"mode", mode}, {"text", "hi"}, {"src_lang", "eng"}, {"tgt_lang", tgt}};
    if (mode == "smt") req["audio_uri"] = "a.wav";
    return tr.handle(req)["text"].get<std::string>();
  };
  EXPECT_EQ(ask("khm", "smt"), "k1 k2");
  EXPECT_EQ(ask("khm", "mt"), "k1");
  EXPECT_EQ(ask("lao", "smt"), "generic");
}

TEST(WireErrors, StatusMapping) {
  EXPECT_EQ(error_from_response(503, "").code(), Errc::BackendUnavailable);
  EXPECT_EQ(error_from_response(429, "").code(), Errc::BackendUnavailable);
  EXPECT_TRUE(error_from_response(500, "{}").retryable());
  EXPECT_EQ(error_from_response(400, R"({"error":"ModeAudioMismatch","detail":"x"})").code(),
            Errc::ModeAudioMismatch);
  EXPECT_EQ(error_from_response(422, "garbage").code(), Errc::BackendProtocol);
  const auto [status, body] = response_from_error(Error(Errc::SynthesisRejected, "no such voice"));
  EXPECT_EQ(status / 100, 4);
  EXPECT_EQ(body["error"], "SynthesisRejected");
  EXPECT_EQ(response_from_error(Error(Errc::BackendUnavailable, "x")).first, 503);
}

TEST(Workspace, ExplicitThenEnvThenCwd) {
  ::setenv(kWorkspaceEnv, "/tmp/from-env", 1);
  EXPECT_EQ(resolve_workspace(std::filesystem::path("/x")), "/x");
  EXPECT_EQ(resolve_workspace(std::nullopt), "/tmp/from-env");
  ::unsetenv(kWorkspaceEnv);
  EXPECT_EQ(resolve_workspace(std::nullopt), ".");
}

}  // namespace
}  // namespace evoloop
