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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace evoloop {

enum class ResourceLevel { Low, Med, High };

std::string_view to_string(ResourceLevel level) noexcept;

/// ISO-639-3 code from the 28-language taxonomy. Construction validates.
class LanguageTag {
 public:
  /// Throws Error(UnknownLanguage) for codes outside the taxonomy.
  static LanguageTag parse(std::string_view code);

  const std::string& code() const noexcept { return code_; }
  ResourceLevel resource_level() const noexcept { return level_; }

  friend bool operator==(const LanguageTag& a, const LanguageTag& b) { return a.code_ == b.code_; }
  friend auto operator<=>(const LanguageTag& a, const LanguageTag& b) { return a.code_ <=> b.code_; }

 private:
  LanguageTag(std::string code, ResourceLevel level) : code_(std::move(code)), level_(level) {}
  std::string code_;
  ResourceLevel level_;
};

/// The built-in taxonomy, sorted by code.
const std::vector<std::pair<std::string_view, ResourceLevel>>& language_taxonomy();

ResourceLevel resource_level(std::string_view code);

/// Languages written without inter-word spaces.
bool is_spaceless_script(std::string_view code) noexcept;

enum class AudioOrigin { Authentic, Synthetic };

struct AudioRef {
  std::string uri;  // workspace-relative
  double duration_s = 0.0;
  int sample_rate_hz = 16000;
  AudioOrigin origin = AudioOrigin::Authentic;
  std::string voice_id;

  friend bool operator==(const AudioRef&, const AudioRef&) = default;
};

struct Sample {
  std::string id;
  LanguageTag src_lang;
  LanguageTag tgt_lang;
  std::string text;
  std::string reference;
  std::optional<AudioRef> authentic_audio;
  std::optional<AudioRef> synthetic_audio;
  std::size_t char_len = 0;
  bool degraded = false;

  std::pair<std::string, std::string> direction() const { return {src_lang.code(), tgt_lang.code()}; }

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Builds a sample from canonical fields, enforcing every Sample invariant.
Sample make_sample(std::string_view src_lang, std::string_view tgt_lang, std::string text,
                   std::string reference);

/// Lowercase hex SHA-256 over the compact JSON array
/// [src_lang, tgt_lang, text, reference].
std::string hash_sample(std::string_view text, std::string_view reference, std::string_view src_lang,
                        std::string_view tgt_lang);

/// The canonical bytes hashed by hash_sample.
std::string canonical_sample_bytes(std::string_view text, std::string_view reference,
                                   std::string_view src_lang, std::string_view tgt_lang);

struct LoadOptions {
  /// Reject unknown keys instead of warning about them.
  bool strict = false;
};

struct LoadWarning {
  std::size_t line_no;
  std::string message;
};

struct ManifestIssue {
  std::size_t line_no;
  std::string message;
};

/// Parses one JSONL line into a Sample. `line_no` is used for errors.
Sample parse_sample(std::string_view line, std::size_t line_no, const LoadOptions& opts = {},
                    std::vector<LoadWarning>* warnings = nullptr);

/// Loads a JSONL manifest in file order. Throws on the first bad line.
std::vector<Sample> load_manifest(const std::filesystem::path& path, const LoadOptions& opts = {},
                                  std::vector<LoadWarning>* warnings = nullptr);

/// Validates every line, collecting all problems instead of stopping.
/// Throws Error(Io) if the file cannot be read.
std::vector<ManifestIssue> validate_manifest(const std::filesystem::path& path,
                                             const LoadOptions& opts, std::size_t& n_ok);

nlohmann::ordered_json to_json(const AudioRef& audio);
AudioRef audio_from_json(const nlohmann::json& j, AudioOrigin origin);
nlohmann::ordered_json to_json(const Sample& sample);

/// One compact JSON object per line, in input order.
std::string to_jsonl(const std::vector<Sample>& samples);

/// Writes via temp file + rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

struct LengthSplit {
  std::vector<Sample> kept;
  std::vector<Sample> dropped;
};

/// kept: char_len < max_chars. Order preserved in both halves.
LengthSplit filter_by_length(const std::vector<Sample>& samples, std::size_t max_chars);

using Direction = std::pair<std::string, std::string>;

std::map<Direction, std::vector<Sample>> split_directions(const std::vector<Sample>& samples);

}  // namespace evoloop
