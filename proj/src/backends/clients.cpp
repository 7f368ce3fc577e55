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

#include <functional>

#include "evoloop/backends.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

std::uint64_t jitter_seed(std::string_view tag) {
  const std::string raw = sha256_raw(tag);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_wire(const SynthesisRequest& req) {
  nlohmann::ordered_json j;
  j["text"] = req.text;
  j["voice_id"] = req.voice_id;
  if (req.target_duration_s) j["target_duration_s"] = *req.target_duration_s;
  return j;
}

TtsClient::TtsClient(std::shared_ptr<Transport> transport, EndpointConfig endpoint,
                     std::shared_ptr<ContentCache> cache, std::string revision, std::filesystem::path workspace)
    : ServiceClient(std::move(transport), std::move(endpoint), std::move(cache), std::move(revision)),
      workspace_(std::move(workspace)) {}

SynthesisResult TtsClient::synthesize_once(const SynthesisRequest& req) {
  if (trim_ascii(req.text).empty()) throw Error(Errc::EmptyField, "synthesize: text is empty");
  if (req.voice_id.empty()) throw Error(Errc::EmptyField, "synthesize: voice_id is empty");

  const auto response = cached_post("tts", "/v1/tts", to_wire(req), [this](const nlohmann::json& r) {
    if (!r.is_object() || !r.contains("uri") || !r["uri"].is_string()) return false;
    return std::filesystem::exists(workspace_ / r["uri"].get<std::string>());
  });

  SynthesisResult out;
  try {
    out.audio.uri = response.at("uri").get<std::string>();
    out.audio.duration_s = response.at("duration_s").get<double>();
    out.audio.sample_rate_hz = response.at("sample_rate_hz").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BackendProtocol, std::string("malformed /v1/tts response: ") + e.what());
  }
  out.audio.origin = AudioOrigin::Synthetic;
  out.audio.voice_id = req.voice_id;
  if (out.audio.uri.empty() || !(out.audio.duration_s > 0.0) || out.audio.sample_rate_hz <= 0) {
    throw Error(Errc::BackendProtocol, "/v1/tts returned an invalid audio descriptor");
  }
  out.overrun = out.audio.duration_s > kMaxSpeechDurationS;
  return out;
}

AudioRef TtsClient::synthesize(const SynthesisRequest& req) {
  int attempts = 0;
  auto result = retry_call([&] { return synthesize_once(req); }, endpoint(),
                           jitter_seed(req.text + '\x1f' + req.voice_id), attempts);
  if (result.overrun) {
    throw Error(Errc::DurationOverrun,
                "synthesized clip is " + std::to_string(result.audio.duration_s) + " s (limit 30 s)");
  }
  return result.audio;
}

// ---------------------------------------------------------------------------

std::string_view to_string(TranslateMode mode) noexcept { return mode == TranslateMode::MT ? "mt" : "smt"; }

nlohmann::ordered_json to_wire(const TranslationRequest& req) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(req.mode);
  j["text"] = req.text;
  if (req.audio) j["audio_uri"] = req.audio->uri;
  j["src_lang"] = req.direction.first;
  j["tgt_lang"] = req.direction.second;
  j["beam"] = kEngineDecode.beam;
  j["temperature"] = kEngineDecode.temperature;
  return j;
}

Hypothesis TranslatorClient::translate_once(const TranslationRequest& req) {
  if (req.mode == TranslateMode::SMT && !req.audio) {
    throw Error(Errc::ModeAudioMismatch, "SMT translation requires audio");
  }
  if (req.mode == TranslateMode::MT && req.audio) {
    throw Error(Errc::ModeAudioMismatch, "MT translation must not carry audio");
  }
  const auto response = cached_post("translate", "/v1/translate", to_wire(req), [](const nlohmann::json& r) {
    return r.is_object() && r.contains("text") && r["text"].is_string() &&
           !trim_ascii(r["text"].get_ref<const std::string&>()).empty();
  });
  if (!response.is_object() || !response.contains("text") || !response["text"].is_string()) {
    throw Error(Errc::BackendProtocol, "malformed /v1/translate response");
  }
  std::string text = response["text"].get<std::string>();
  if (trim_ascii(text).empty()) throw Error(Errc::EmptyTranslation, "backend returned an empty translation");
  return Hypothesis{req.mode, std::move(text), kEngineDecode};
}

Hypothesis TranslatorClient::translate(const TranslationRequest& req) {
  int attempts = 0;
  return retry_call([&] { return translate_once(req); }, endpoint(), jitter_seed(req.text), attempts);
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_wire(const ScoreRequest& req) {
  nlohmann::ordered_json j;
  j["source"] = req.source;
  j["hypothesis"] = req.hypothesis;
  j["reference"] = req.reference;
  return j;
}

namespace {

bool in_unit_range(const nlohmann::json& r) {
  if (!r.is_object() || !r.contains("score") || !r["score"].is_number()) return false;
  const double s = r["score"].get<double>();
  return s >= 0.0 && s <= 1.0;
}

}  // namespace

double ScorerClient::score_once(const ScoreRequest& req) {
  if (req.source.empty() || req.hypothesis.empty() || req.reference.empty()) {
    throw Error(Errc::EmptyField, "score: source, hypothesis and reference must be non-empty");
  }
  const auto response = cached_post("score", "/v1/score", to_wire(req), in_unit_range);
  if (!response.is_object() || !response.contains("score") || !response["score"].is_number()) {
    throw Error(Errc::BackendProtocol, "malformed /v1/score response");
  }
  if (!in_unit_range(response)) {
    throw Error(Errc::ScoreOutOfRange, "scorer returned " + response["score"].dump() + ", outside [0,1]");
  }
  return response["score"].get<double>();
}

double ScorerClient::score(const ScoreRequest& req) {
  int attempts = 0;
  return retry_call([&] { return score_once(req); }, endpoint(), jitter_seed(req.hypothesis), attempts);
}

}  // namespace evoloop
