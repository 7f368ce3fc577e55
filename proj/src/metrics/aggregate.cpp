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
#include <cstdio>

#include "evoloop/error.hpp"
#include "evoloop/metrics.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

ScorePair average_directions(const std::vector<DirectionScore>& rows) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "average_directions: no rows");
  double bleu = 0.0;
  double comet = 0.0;
  for (const auto& r : rows) {
    bleu += r.spbleu;
    comet += r.comet;
  }
  const auto n = static_cast<double>(rows.size());
  return {bleu / n, comet / n};
}

std::map<ResourceLevel, ScorePair> aggregate_by_resource(const std::vector<DirectionScore>& rows) {
  std::map<ResourceLevel, std::vector<DirectionScore>> groups;
  for (const auto& r : rows) groups[resource_level(r.direction.second)].push_back(r);
  std::map<ResourceLevel, ScorePair> out;
  for (const auto& [level, members] : groups) out[level] = average_directions(members);
  return out;
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

std::string format_pair(const ScorePair& pair) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f / %.1f", round1(pair.spbleu), round1(pair.comet * 100.0));
  return buf;
}

std::size_t length_tokens(std::string_view text, std::string_view lang) {
  if (!is_spaceless_script(lang)) return tokenize_13a(text).size();
  std::size_t n = 0;
  for (char32_t c : utf8_decode(text)) n += is_unicode_space(c) ? 0 : 1;
  return n;
}

double under_translation_rate(const std::vector<std::pair<std::string, std::string>>& pairs,
                              std::string_view tgt_lang, double ratio_threshold) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "under_translation_rate: no pairs");
  if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) {
    throw Error(Errc::Config, "under_translation_rate: ratio_threshold must lie in (0,1)");
  }
  std::size_t flagged = 0;
  for (const auto& [hyp, ref] : pairs) {
    const std::size_t ref_n = length_tokens(ref, tgt_lang);
    if (ref_n == 0) continue;
    const double ratio = static_cast<double>(length_tokens(hyp, tgt_lang)) / static_cast<double>(ref_n);
    if (ratio < ratio_threshold) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(pairs.size());
}

}  // namespace evoloop
