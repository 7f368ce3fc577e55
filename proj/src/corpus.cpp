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

#include "evoloop/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "evoloop/error.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

using json = nlohmann::json;

const std::array<std::string_view, 12> kKnownKeys = {
    "id",       "src_lang", "tgt_lang", "text",  "reference", "authentic_audio",
    "synthetic_audio", "degraded", "s1", "s2", "label", "char_len"};

std::string require_string(const json& obj, const char* field, std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw Error(Errc::EmptyField, std::string("missing field '") + field + "'", line_no);
  }
  if (!it->is_string()) {
    throw Error(Errc::MalformedLine, std::string("field '") + field + "' must be a string", line_no);
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(ResourceLevel level) noexcept {
  switch (level) {
    case ResourceLevel::Low: return "Low";
    case ResourceLevel::Med: return "Med";
    case ResourceLevel::High: return "High";
  }
  return "?";
}

const std::vector<std::pair<std::string_view, ResourceLevel>>& language_taxonomy() {
  using R = ResourceLevel;
  static const std::vector<std::pair<std::string_view, ResourceLevel>> table = {
      {"ara", R::High}, {"ben", R::Med},  {"ces", R::High}, {"cmn", R::High},
      {"deu", R::High}, {"eng", R::High}, {"fas", R::High}, {"fra", R::High},
      {"heb", R::Med},  {"hin", R::High}, {"ind", R::Med},  {"ita", R::High},
      {"jpn", R::High}, {"khm", R::Low},  {"kor", R::High}, {"lao", R::Low},
      {"msa", R::Med},  {"mya", R::Low},  {"nld", R::High}, {"pol", R::High},
      {"por", R::High}, {"rus", R::High}, {"spa", R::High}, {"tgl", R::Med},
      {"tha", R::Med},  {"tur", R::High}, {"urd", R::Med},  {"vie", R::High},
  };
  return table;
}

ResourceLevel resource_level(std::string_view code) {
  const auto& table = language_taxonomy();
  auto it = std::lower_bound(table.begin(), table.end(), code,
                             [](const auto& entry, std::string_view c) { return entry.first < c; });
  if (it == table.end() || it->first != code) {
    throw Error(Errc::UnknownLanguage, "unknown language code '" + std::string(code) + "'");
  }
  return it->second;
}

bool is_spaceless_script(std::string_view code) noexcept {
  static constexpr std::array<std::string_view, 6> kSpaceless = {"cmn", "jpn", "tha", "khm", "lao", "mya"};
  return std::find(kSpaceless.begin(), kSpaceless.end(), code) != kSpaceless.end();
}

LanguageTag LanguageTag::parse(std::string_view code) {
  return LanguageTag(std::string(code), evoloop::resource_level(code));
}

std::string canonical_sample_bytes(std::string_view text, std::string_view reference,
                                   std::string_view src_lang, std::string_view tgt_lang) {
  json arr = json::array({std::string(src_lang), std::string(tgt_lang), std::string(text),
                          std::string(reference)});
  return arr.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string hash_sample(std::string_view text, std::string_view reference, std::string_view src_lang,
                        std::string_view tgt_lang) {
  return sha256_hex(canonical_sample_bytes(text, reference, src_lang, tgt_lang));
}

Sample make_sample(std::string_view src_lang, std::string_view tgt_lang, std::string text,
                   std::string reference) {
  LanguageTag src = LanguageTag::parse(src_lang);
  LanguageTag tgt = LanguageTag::parse(tgt_lang);
  if (trim_ascii(text).empty()) throw Error(Errc::EmptyField, "field 'text' is empty");
  if (trim_ascii(reference).empty()) throw Error(Errc::EmptyField, "field 'reference' is empty");
  if (src == tgt) throw Error(Errc::InvalidSample, "src_lang equals tgt_lang ('" + src.code() + "')");
  if (!utf8_valid(text) || !utf8_valid(reference)) {
    throw Error(Errc::InvalidSample, "text or reference is not valid UTF-8");
  }
  Sample s{.id = hash_sample(text, reference, src.code(), tgt.code()),
           .src_lang = std::move(src),
           .tgt_lang = std::move(tgt),
           .text = std::move(text),
           .reference = std::move(reference),
           .authentic_audio = std::nullopt,
           .synthetic_audio = std::nullopt,
           .char_len = 0,
           .degraded = false};
  s.char_len = scalar_count(s.text);
  return s;
}

nlohmann::ordered_json to_json(const AudioRef& audio) {
  nlohmann::ordered_json j;
  j["uri"] = audio.uri;
  j["duration_s"] = audio.duration_s;
  j["sample_rate_hz"] = audio.sample_rate_hz;
  j["voice_id"] = audio.voice_id;
  return j;
}

AudioRef audio_from_json(const json& j, AudioOrigin origin) {
  if (!j.is_object()) throw Error(Errc::MalformedLine, "audio reference must be an object");
  AudioRef a;
  a.origin = origin;
  try {
    a.uri = j.at("uri").get<std::string>();
    a.duration_s = j.value("duration_s", 0.0);
    a.sample_rate_hz = j.value("sample_rate_hz", 16000);
    a.voice_id = j.value("voice_id", std::string());
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedLine, std::string("bad audio reference: ") + e.what());
  }
  if (a.uri.empty()) throw Error(Errc::EmptyField, "audio uri is empty");
  if (a.duration_s < 0.0) throw Error(Errc::InvalidSample, "audio duration_s is negative");
  if (a.sample_rate_hz <= 0) throw Error(Errc::InvalidSample, "audio sample_rate_hz must be positive");
  if (origin == AudioOrigin::Synthetic && a.voice_id.empty()) {
    throw Error(Errc::EmptyField, "synthetic audio requires voice_id");
  }
  return a;
}

nlohmann::ordered_json to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["src_lang"] = s.src_lang.code();
  j["tgt_lang"] = s.tgt_lang.code();
  j["text"] = s.text;
  j["reference"] = s.reference;
  if (s.authentic_audio) j["authentic_audio"] = to_json(*s.authentic_audio);
  if (s.synthetic_audio) j["synthetic_audio"] = to_json(*s.synthetic_audio);
  if (s.degraded) j["degraded"] = true;
  return j;
}

std::string to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

Sample parse_sample(std::string_view line, std::size_t line_no, const LoadOptions& opts,
                    std::vector<LoadWarning>* warnings) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
  if (!obj.is_object()) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": not a JSON object", line_no);
  }
  for (const auto& [key, _] : obj.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end()) continue;
    if (opts.strict) {
      throw Error(Errc::UnknownField, "line " + std::to_string(line_no) + ": unknown field '" + key + "'",
                  line_no);
    }
    if (warnings) warnings->push_back({line_no, "unknown field '" + key + "'"});
  }

  const std::string src = require_string(obj, "src_lang", line_no);
  const std::string tgt = require_string(obj, "tgt_lang", line_no);
  std::string text = require_string(obj, "text", line_no);
  std::string reference = require_string(obj, "reference", line_no);

  Sample s = [&] {
    try {
      return make_sample(src, tgt, std::move(text), std::move(reference));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }();

  try {
    if (auto it = obj.find("authentic_audio"); it != obj.end() && !it->is_null()) {
      s.authentic_audio = audio_from_json(*it, AudioOrigin::Authentic);
    }
    if (auto it = obj.find("synthetic_audio"); it != obj.end() && !it->is_null()) {
      s.synthetic_audio = audio_from_json(*it, AudioOrigin::Synthetic);
    }
  } catch (const Error& e) {
    throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
  if (auto it = obj.find("char_len"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_unsigned() || it->get<std::size_t>() != s.char_len) {
      throw Error(Errc::InvalidSample, "line " + std::to_string(line_no) + ": stored char_len does not match text",
                  line_no);
    }
  }
  if (auto it = obj.find("degraded"); it != obj.end() && it->is_boolean()) s.degraded = it->get<bool>();

  if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>() != s.id) {
      throw Error(Errc::IdMismatch, "line " + std::to_string(line_no) + ": stored id does not match content hash",
                  line_no);
    }
  }
  return s;
}

namespace {

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open manifest '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_ascii(line).empty()) continue;
    fn(line, line_no);
  }
  if (in.bad()) throw Error(Errc::Io, "read error on '" + path.string() + "'");
}

}  // namespace

std::vector<Sample> load_manifest(const std::filesystem::path& path, const LoadOptions& opts,
                                  std::vector<LoadWarning>* warnings) {
  std::vector<Sample> out;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    out.push_back(parse_sample(line, line_no, opts, warnings));
  });
  return out;
}

std::vector<ManifestIssue> validate_manifest(const std::filesystem::path& path, const LoadOptions& opts,
                                             std::size_t& n_ok) {
  std::vector<ManifestIssue> issues;
  n_ok = 0;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    try {
      parse_sample(line, line_no, opts, nullptr);
      ++n_ok;
    } catch (const Error& e) {
      issues.push_back({line_no, std::string(errc_name(e.code())) + ": " + e.what()});
    }
  });
  return issues;
}

void write_text_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Errc::Io, "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::Io, "rename to '" + path.string() + "' failed: " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LengthSplit filter_by_length(const std::vector<Sample>& samples, std::size_t max_chars) {
  LengthSplit out;
  for (const auto& s : samples) (s.char_len < max_chars ? out.kept : out.dropped).push_back(s);
  return out;
}

std::map<Direction, std::vector<Sample>> split_directions(const std::vector<Sample>& samples) {
  std::map<Direction, std::vector<Sample>> out;
  for (const auto& s : samples) out[s.direction()].push_back(s);
  return out;
}

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
#define EVOLOOP_ERRC(x) \
  case Errc::x:         \
    return #x;
    EVOLOOP_ERRC(MalformedLine)
    EVOLOOP_ERRC(UnknownLanguage)
    EVOLOOP_ERRC(EmptyField)
    EVOLOOP_ERRC(IdMismatch)
    EVOLOOP_ERRC(UnknownField)
    EVOLOOP_ERRC(InvalidSample)
    EVOLOOP_ERRC(LengthMismatch)
    EVOLOOP_ERRC(EmptyCorpus)
    EVOLOOP_ERRC(EmptyInput)
    EVOLOOP_ERRC(InvalidPieceTable)
    EVOLOOP_ERRC(BackendUnavailable)
    EVOLOOP_ERRC(BackendProtocol)
    EVOLOOP_ERRC(SynthesisRejected)
    EVOLOOP_ERRC(DurationOverrun)
    EVOLOOP_ERRC(ModeAudioMismatch)
    EVOLOOP_ERRC(EmptyTranslation)
    EVOLOOP_ERRC(ScoreOutOfRange)
    EVOLOOP_ERRC(FailureBudgetExceeded)
    EVOLOOP_ERRC(MissingAudio)
    EVOLOOP_ERRC(EmptyEvalSet)
    EVOLOOP_ERRC(ResumeStateCorrupt)
    EVOLOOP_ERRC(HookFailed)
    EVOLOOP_ERRC(Interrupted)
    EVOLOOP_ERRC(MissingBinding)
    EVOLOOP_ERRC(MissingManifest)
    EVOLOOP_ERRC(MissingHypotheses)
    EVOLOOP_ERRC(NoRounds)
    EVOLOOP_ERRC(Io)
    EVOLOOP_ERRC(Config)
#undef EVOLOOP_ERRC
  }
  return "Unknown";
}

}  // namespace evoloop
