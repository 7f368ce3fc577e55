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

#include <sstream>

#include "evoloop/error.hpp"
#include "evoloop/metrics.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace evoloop {
namespace {

using testing::fixture;

std::vector<DirectionScore> table_rows(std::string_view name) {
  std::vector<DirectionScore> rows;
  std::istringstream in(testing::slurp(fixture(std::string("tables/") + std::string(name) + ".jsonl")));
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    rows.push_back({{j["src"], j["tgt"]}, j["spbleu"].get<double>(), j["comet"].get<double>(), 1});
  }
  return rows;
}

TEST(AverageDirections, PublishedTableAverages) {
  EXPECT_EQ(format_pair(average_directions(table_rows("flores200_smt_9b"))), "31.1 / 87.7");
  EXPECT_EQ(format_pair(average_directions(table_rows("wmt24pp_smt_9b"))), "33.4 / 83.0");
  EXPECT_EQ(format_pair(average_directions(table_rows("wmt24pp_baseline"))), "33.9 / 82.7");
  // The transcribed baseline rows average to 86.27 COMET.
  const ScorePair base = average_directions(table_rows("flores200_baseline"));
  EXPECT_EQ(round1(base.spbleu), 30.3);
  EXPECT_NEAR(100.0 * base.comet, 86.2713, 1e-4);
}

TEST(AverageDirections, SingleRowIsItself) {
  const DirectionScore row{{"eng", "khm"}, 21.04, 0.8512, 10};
  const ScorePair avg = average_directions({row});
  EXPECT_EQ(avg.spbleu, row.spbleu);
  EXPECT_EQ(avg.comet, row.comet);
  EXPECT_THROW(average_directions({}), Error);
}

TEST(AggregateByResource, MatchesIndependentGroupBy) {
  const auto rows = table_rows("flores200_smt_9b");
  std::vector<std::pair<std::string, double>> bleu, comet;
  const std::map<std::string, std::string> level = {
      {"khm", "Low"}, {"lao", "Low"}, {"mya", "Low"}, {"ben", "Med"}, {"heb", "Med"}, {"ind", "Med"},
      {"msa", "Med"}, {"tgl", "Med"}, {"tha", "Med"}, {"urd", "Med"}};
  for (const auto& r : rows) {
    auto it = level.find(r.direction.second);
    const std::string group = it == level.end() ? "High" : it->second;
    bleu.emplace_back(group, r.spbleu);
    comet.emplace_back(group, r.comet);
  }
  const auto want_bleu = testing::oracle_group_mean(bleu);
  const auto want_comet = testing::oracle_group_mean(comet);
  const auto got = aggregate_by_resource(rows);
  ASSERT_EQ(got.size(), 3U);
  for (const auto& [lvl, pair] : got) {
    const std::string name(to_string(lvl));
    EXPECT_NEAR(pair.spbleu, want_bleu.at(name), 1e-9) << name;
    EXPECT_NEAR(pair.comet, want_comet.at(name), 1e-12) << name;
  }
}

TEST(AggregateByResource, OmitsEmptyGroups) {
  const auto got = aggregate_by_resource({{{"eng", "khm"}, 10.0, 0.5, 1}, {{"eng", "lao"}, 20.0, 0.7, 1}});
  ASSERT_EQ(got.size(), 1U);
  EXPECT_DOUBLE_EQ(got.at(ResourceLevel::Low).spbleu, 15.0);
}

TEST(Rounding, HalfAwayFromZero) {
  EXPECT_EQ(round1(31.25), 31.3);
  EXPECT_EQ(round1(-0.25), -0.3);
  EXPECT_EQ(round1(87.72037), 87.7);
  EXPECT_EQ(format_pair({30.312, 0.8627}), "30.3 / 86.3");
}

TEST(UnderTranslation, LengthRatioHeuristic) {
  // 13a tokens: 2 vs 5 -> ratio 0.4 flagged; 4 vs 5 -> 0.8 kept.
  const std::vector<std::pair<std::string, std::string>> pairs = {{"a b", "a b c d e"}, {"a b c d", "a b c d e"}};
  EXPECT_DOUBLE_EQ(under_translation_rate(pairs, "fra"), 0.5);
  // Space-less scripts count non-space scalars.
  EXPECT_EQ(length_tokens("ສະບາຍ ດີ", "lao"), 7U);
  EXPECT_EQ(length_tokens("hello, world", "fra"), 3U);
  EXPECT_DOUBLE_EQ(under_translation_rate({{"ສະ", "ສະບາຍດີ"}}, "lao"), 1.0);
  EXPECT_DOUBLE_EQ(under_translation_rate({{"x", " "}}, "fra"), 0.0);
  EXPECT_THROW(under_translation_rate(pairs, "fra", 0.0), Error);
  EXPECT_THROW(under_translation_rate(pairs, "fra", 1.0), Error);
}

}  // namespace
}  // namespace evoloop
