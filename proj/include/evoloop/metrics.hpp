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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "evoloop/corpus.hpp"

namespace evoloop {

inline constexpr int kMaxNgramOrder = 4;

// ---------------------------------------------------------------------------
// Tokenization

/// mteval-v13a tokenization as implemented by sacreBLEU's "13a" tokenizer.
std::vector<std::string> tokenize_13a(std::string_view text);

/// U+2581, prefixed to word-initial pieces.
inline constexpr char32_t kSpaceMarker = 0x2581;

/// A unigram SentencePiece vocabulary with per-piece log-probabilities.
class PieceTable {
 public:
  PieceTable() = default;

  /// `unk_logprob` defaults to (min logprob - 10) when not given.
  static PieceTable from_entries(const std::vector<std::pair<std::string, double>>& entries,
                                 std::string unk_piece = "<unk>",
                                 std::optional<double> unk_logprob = std::nullopt);

  /// TSV: piece<TAB>logprob, '#' comment lines ignored, duplicates rejected.
  /// A row for "<unk>" sets the unknown-piece log-probability.
  static PieceTable load_tsv(const std::filesystem::path& path);
  static PieceTable parse_tsv(std::string_view contents);

  std::optional<double> logprob(std::string_view piece) const;
  const std::string& unk_piece() const noexcept { return unk_piece_; }
  double unk_logprob() const noexcept { return unk_logprob_; }
  std::size_t size() const noexcept { return pieces_.size(); }
  std::size_t max_piece_scalars() const noexcept { return max_len_; }

 private:
  std::unordered_map<std::string, double> pieces_;
  std::string unk_piece_ = "<unk>";
  double unk_logprob_ = -10.0;
  std::size_t max_len_ = 0;
};

/// Trims, collapses ASCII space runs, maps each space to U+2581 and prepends
/// one marker. Blank input normalizes to the empty string. This is the
/// string sp_segment reconstructs.
std::u32string marker_normalize(std::string_view text);

struct Segment {
  std::string piece;  // unk_piece when `unknown`
  std::string surface;  // covered text (marker-normalized)
  bool unknown = false;
};

struct Segmentation {
  std::vector<Segment> segments;
  double logprob = 0.0;

  std::vector<std::string> pieces() const;
  /// Concatenated surfaces; equals utf8_encode(marker_normalize(text)).
  std::string reconstruct() const;
};

/// Viterbi over codepoint positions maximizing the summed piece log-prob.
Segmentation sp_segment_detailed(std::string_view text, const PieceTable& table);
std::vector<std::string> sp_segment(std::string_view text, const PieceTable& table);

// ---------------------------------------------------------------------------
// BLEU

struct BleuResult {
  double score = 0.0;
  std::array<double, kMaxNgramOrder> precisions{};
  double brevity_penalty = 1.0;
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;
  std::array<std::size_t, kMaxNgramOrder> matches{};
  std::array<std::size_t, kMaxNgramOrder> totals{};
};

enum class Smoothing { Exp, None };

struct Tok13a {};
struct TokSpPieces {
  const PieceTable* table;
};
using BleuTokenizer = std::variant<Tok13a, TokSpPieces>;

/// Clipped n-gram statistics for one segment pair.
struct NgramStats {
  std::array<std::size_t, kMaxNgramOrder> matches{};
  std::array<std::size_t, kMaxNgramOrder> totals{};
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;
};

NgramStats sentence_stats(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

/// BLEU from sufficient statistics, following the reference scorer's formula.
BleuResult bleu_from_stats(const NgramStats& stats, Smoothing smoothing);

/// Single-reference corpus BLEU.
BleuResult corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                       const BleuTokenizer& tokenizer = Tok13a{}, Smoothing smoothing = Smoothing::Exp);

std::vector<std::string> tokenize_for_bleu(std::string_view segment, const BleuTokenizer& tokenizer);

// ---------------------------------------------------------------------------
// Aggregation

struct DirectionScore {
  Direction direction;
  double spbleu = 0.0;  // [0,100]
  double comet = 0.0;   // [0,1]
  std::size_t n_samples = 1;
};

struct ScorePair {
  double spbleu = 0.0;
  double comet = 0.0;  // [0,1]
};

/// Unweighted mean over rows (full precision; use round1 for display).
ScorePair average_directions(const std::vector<DirectionScore>& rows);

/// Groups by resource_level(tgt); empty groups omitted.
std::map<ResourceLevel, ScorePair> aggregate_by_resource(const std::vector<DirectionScore>& rows);

/// Round half away from zero to one decimal.
double round1(double value);

/// "31.1 / 87.7" for a pair (COMET rendered x100).
std::string format_pair(const ScorePair& pair);

inline constexpr double kDefaultUnderTranslationRatio = 0.6;

/// Length-ratio token count: 13a tokens, or non-space scalars for the
/// space-less scripts (cmn, jpn, tha, khm, lao, mya).
std::size_t length_tokens(std::string_view text, std::string_view lang);

/// Fraction of pairs whose hypothesis/reference length ratio falls below
/// `ratio_threshold`.
double under_translation_rate(const std::vector<std::pair<std::string, std::string>>& pairs,
                              std::string_view tgt_lang, double ratio_threshold = kDefaultUnderTranslationRatio);

}  // namespace evoloop
