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
#include <map>

#include "evoloop/error.hpp"
#include "evoloop/metrics.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

// log(0) stand-in used by the reference scorer.
constexpr double kLogZero = -9999999999.0;

double safe_log(double p) { return p == 0.0 ? kLogZero : std::log(p); }

std::string rstrip_unicode(std::string_view s) {
  std::u32string u = utf8_decode(s);
  while (!u.empty() && is_unicode_space(u.back())) u.pop_back();
  return utf8_encode(u);
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

std::vector<std::string> tokenize_for_bleu(std::string_view segment, const BleuTokenizer& tokenizer) {
  const std::string stripped = rstrip_unicode(segment);
  if (std::holds_alternative<Tok13a>(tokenizer)) return tokenize_13a(stripped);
  const PieceTable* table = std::get<TokSpPieces>(tokenizer).table;
  return sp_segment(stripped, *table);
}

NgramStats sentence_stats(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  NgramStats st;
  st.sys_len = hyp.size();
  st.ref_len = ref.size();
  for (std::size_t n = 1; n <= kMaxNgramOrder; ++n) {
    const NgramCounts h = count_ngrams(hyp, n);
    const NgramCounts r = count_ngrams(ref, n);
    for (const auto& [gram, count] : h) {
      st.totals[n - 1] += count;
      if (auto it = r.find(gram); it != r.end()) st.matches[n - 1] += std::min(count, it->second);
    }
  }
  return st;
}

BleuResult bleu_from_stats(const NgramStats& st, Smoothing smoothing) {
  BleuResult r;
  r.sys_len = st.sys_len;
  r.ref_len = st.ref_len;
  r.matches = st.matches;
  r.totals = st.totals;

  r.brevity_penalty = 1.0;
  if (st.sys_len < st.ref_len) {
    r.brevity_penalty = st.sys_len > 0
                            ? std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.sys_len))
                            : 0.0;
  }

  // Precisions are computed in percent to follow the reference arithmetic.
  std::array<double, kMaxNgramOrder> pct{};
  bool any_match = false;
  for (std::size_t m : st.matches) any_match = any_match || m > 0;
  if (!any_match) {
    r.score = 0.0;
    return r;
  }

  double smooth = 1.0;
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
    if (st.totals[n] == 0) break;
    if (st.matches[n] == 0) {
      if (smoothing == Smoothing::Exp) {
        smooth *= 2.0;
        pct[n] = 100.0 / (smooth * static_cast<double>(st.totals[n]));
      }
    } else {
      pct[n] = 100.0 * static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]);
    }
  }
  double log_sum = 0.0;
  for (double p : pct) log_sum += safe_log(p);
  r.score = r.brevity_penalty * std::exp(log_sum / kMaxNgramOrder);
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) r.precisions[n] = pct[n] / 100.0;
  return r;
}

BleuResult corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                       const BleuTokenizer& tokenizer, Smoothing smoothing) {
  if (hypotheses.size() != references.size()) {
    throw Error(Errc::LengthMismatch, "corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                                          std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw Error(Errc::EmptyCorpus, "corpus_bleu: empty corpus");

  NgramStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const NgramStats s =
        sentence_stats(tokenize_for_bleu(hypotheses[i], tokenizer), tokenize_for_bleu(references[i], tokenizer));
    total.sys_len += s.sys_len;
    total.ref_len += s.ref_len;
    for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
      total.matches[n] += s.matches[n];
      total.totals[n] += s.totals[n];
    }
  }
  return bleu_from_stats(total, smoothing);
}

}  // namespace evoloop
