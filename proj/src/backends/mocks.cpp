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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <thread>
#include <unordered_map>

#include "evoloop/backends.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

void put_le(std::ofstream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string require_str(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(Errc::EmptyField, std::string("request field '") + key + "' missing or not a string");
  }
  return it->get<std::string>();
}

}  // namespace

void write_silent_wav(const std::filesystem::path& path, double duration_s, int sample_rate_hz) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto n_samples = static_cast<std::uint32_t>(std::llround(duration_s * sample_rate_hz));
  const std::uint32_t data_bytes = n_samples * 2;
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write '" + tmp.string() + "'");
    out.write("RIFF", 4);
    put_le(out, 36 + data_bytes, 4);
    out.write("WAVEfmt ", 8);
    put_le(out, 16, 4);                                                // fmt chunk size
    put_le(out, 1, 2);                                                 // PCM
    put_le(out, 1, 2);                                                 // mono
    put_le(out, static_cast<std::uint32_t>(sample_rate_hz), 4);
    put_le(out, static_cast<std::uint32_t>(sample_rate_hz) * 2, 4);    // byte rate
    put_le(out, 2, 2);                                                 // block align
    put_le(out, 16, 2);                                                // bits per sample
    out.write("data", 4);
    put_le(out, data_bytes, 4);
    const std::string zeros(4096, '\0');
    for (std::uint32_t left = data_bytes; left > 0;) {
      const auto chunk = std::min<std::uint32_t>(left, static_cast<std::uint32_t>(zeros.size()));
      out.write(zeros.data(), chunk);
      left -= chunk;
    }
    if (!out) throw Error(Errc::Io, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::Io, "rename failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

MockTts::MockTts(Options opts) : opts_(std::move(opts)) {}

nlohmann::json MockTts::handle(const nlohmann::json& request) const {
  const std::string text = require_str(request, "text");
  const std::string voice = require_str(request, "voice_id");
  if (trim_ascii(text).empty()) throw Error(Errc::SynthesisRejected, "empty text");
  if (!opts_.voices.empty() && !opts_.voices.contains(voice)) {
    throw Error(Errc::SynthesisRejected, "unknown voice '" + voice + "'");
  }
  double duration = static_cast<double>(scalar_count(text)) / opts_.chars_per_second;
  if (auto it = request.find("target_duration_s"); it != request.end() && it->is_number()) {
    duration = it->get<double>();
  }
  if (opts_.forced_duration_s) duration = *opts_.forced_duration_s;
  if (!(duration > 0.0)) throw Error(Errc::SynthesisRejected, "non-positive duration");

  constexpr int kRate = 16000;
  const std::string uri = "audio/tts/" + sha256_hex(request.dump()).substr(0, 32) + ".wav";
  const auto path = opts_.workspace / uri;
  if (!std::filesystem::exists(path)) write_silent_wav(path, duration, kRate);
  return {{"uri", uri}, {"duration_s", duration}, {"sample_rate_hz", kRate}};
}

// ---------------------------------------------------------------------------

MockTranslator::MockTranslator(Options opts) : opts_(std::move(opts)) {}

std::string MockTranslator::lexicon_key(std::string_view tgt_lang, std::string_view text) {
  return std::string(tgt_lang) + '\t' + std::string(text);
}

nlohmann::json MockTranslator::handle(const nlohmann::json& request) const {
  const std::string mode = require_str(request, "mode");
  const std::string text = require_str(request, "text");
  const bool has_audio = request.contains("audio_uri") && !request["audio_uri"].is_null();
  if (mode != "mt" && mode != "smt") throw Error(Errc::BackendProtocol, "unknown mode '" + mode + "'");
  if ((mode == "mt") == has_audio) throw Error(Errc::ModeAudioMismatch, "mode/audio mismatch");
  if (has_audio && !opts_.workspace.empty()) {
    const auto uri = request["audio_uri"].get<std::string>();
    if (!std::filesystem::exists(opts_.workspace / uri)) {
      throw Error(Errc::MissingAudio, "audio '" + uri + "' not found in workspace");
    }
  }

  auto it = opts_.lexicon.find(lexicon_key(request.value("tgt_lang", std::string()), text));
  if (it == opts_.lexicon.end()) it = opts_.lexicon.find(text);
  std::string out = it != opts_.lexicon.end() ? it->second : text;
  if (mode == "mt" && opts_.drop_last_token_in_mt) {
    auto tokens = split_whitespace(out);
    if (tokens.size() > 1) {
      tokens.pop_back();
      out.clear();
      for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
    }
  }
  return {{"text", out}};
}

// ---------------------------------------------------------------------------

MockScorer::MockScorer(Options opts) : opts_(std::move(opts)) {}

double MockScorer::token_f1(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = split_whitespace(hypothesis);
  const auto ref = split_whitespace(reference);
  if (hyp.empty() || ref.empty()) return 0.0;
  std::unordered_map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : hyp) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(hyp.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

nlohmann::json MockScorer::handle(const nlohmann::json& request) const {
  require_str(request, "source");
  const std::string hyp = require_str(request, "hypothesis");
  const std::string ref = require_str(request, "reference");
  const double s = opts_.constant ? *opts_.constant : opts_.scale * token_f1(hyp, ref);
  return {{"score", s}};
}

// ---------------------------------------------------------------------------

MockTransport::MockTransport(std::shared_ptr<const MockTts> tts, std::shared_ptr<const MockTranslator> translator,
                             std::shared_ptr<const MockScorer> scorer)
    : tts_(std::move(tts)), translator_(std::move(translator)), scorer_(std::move(scorer)) {}

nlohmann::json MockTransport::post(std::string_view path, const nlohmann::json& body) {
  {
    std::lock_guard lock(mu_);
    ++counts_[std::string(path)];
  }
  if (path == "/v1/tts" && tts_) return tts_->handle(body);
  if (path == "/v1/translate" && translator_) return translator_->handle(body);
  if (path == "/v1/score" && scorer_) return scorer_->handle(body);
  throw Error(Errc::BackendProtocol, "no mock handler for '" + std::string(path) + "'");
}

std::size_t MockTransport::requests(std::string_view path) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(path);
  return it == counts_.end() ? 0 : it->second;
}

std::size_t MockTransport::total_requests() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, c] : counts_) n += c;
  return n;
}

}  // namespace evoloop
