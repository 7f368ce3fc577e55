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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace evoloop {

enum class Errc {
  // corpus
  MalformedLine,
  UnknownLanguage,
  EmptyField,
  IdMismatch,
  UnknownField,
  InvalidSample,
  // metrics
  LengthMismatch,
  EmptyCorpus,
  EmptyInput,
  InvalidPieceTable,
  // backends
  BackendUnavailable,
  BackendProtocol,
  SynthesisRejected,
  DurationOverrun,
  ModeAudioMismatch,
  EmptyTranslation,
  ScoreOutOfRange,
  FailureBudgetExceeded,
  // evolution
  MissingAudio,
  EmptyEvalSet,
  ResumeStateCorrupt,
  HookFailed,
  Interrupted,
  // curriculum
  MissingBinding,
  MissingManifest,
  // cli
  MissingHypotheses,
  NoRounds,
  Io,
  Config,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library. `code` drives CLI exit codes and
/// retry decisions; `line` is set for manifest errors (1-based).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(what), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

  /// Transport-level failures are the only ones worth retrying.
  bool retryable() const noexcept { return code_ == Errc::BackendUnavailable; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace evoloop
