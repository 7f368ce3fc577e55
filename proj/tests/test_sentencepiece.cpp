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

#include <random>

#include "evoloop/error.hpp"
#include "evoloop/metrics.hpp"
#include "evoloop/text.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace evoloop {
namespace {

using testing::fixture;

struct RandomTable {
  PieceTable table;
  std::map<std::u32string, double> entries;
};

RandomTable random_table(std::mt19937_64& rng, std::size_t max_pieces) {
  const std::u32string alphabet = U"▁abc";
  std::uniform_real_distribution<double> lp(-12.0, -0.5);
  RandomTable t;
  const std::size_t n = 1 + rng() % max_pieces;
  while (t.entries.size() < n) {
    std::u32string piece;
    const std::size_t len = 1 + rng() % 4;
    for (std::size_t i = 0; i < len; ++i) piece += alphabet[rng() % alphabet.size()];
    t.entries.emplace(piece, lp(rng));
  }
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [p, v] : t.entries) rows.emplace_back(utf8_encode(p), v);
  t.table = PieceTable::from_entries(rows);
  return t;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  const std::string alphabet = "abc ";
  std::string s;
  const std::size_t len = rng() % (max_len + 1);
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

TEST(MarkerNormalize, TrimsCollapsesAndPrefixes) {
  EXPECT_EQ(utf8_encode(marker_normalize("  hello   world ")), "▁hello▁world");
  EXPECT_TRUE(marker_normalize("   ").empty());
  EXPECT_EQ(utf8_encode(marker_normalize("x")), "▁x");
}

TEST(SpSegment, ViterbiEqualsExhaustiveSearch) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 20; ++t) {
    const auto rt = random_table(rng, 30);
    for (int k = 0; k < 40; ++k) {
      const std::string text = random_text(rng, 12);
      const std::u32string norm = testing::oracle_marker_normalize(text);
      ASSERT_EQ(marker_normalize(text), norm);
      const Segmentation seg = sp_segment_detailed(text, rt.table);
      const double best = testing::oracle_best_segmentation(norm, rt.entries, rt.table.unk_logprob());
      ASSERT_NEAR(seg.logprob, best, 1e-9) << "text '" << text << "'";
      double sum = 0.0;
      for (const auto& s : seg.segments) sum += s.unknown ? rt.table.unk_logprob() : *rt.table.logprob(s.piece);
      ASSERT_NEAR(sum, seg.logprob, 1e-9);
      ASSERT_EQ(seg.reconstruct(), utf8_encode(norm));
    }
  }
}

TEST(SpSegment, ReconstructsArbitraryUnicode) {
  std::mt19937_64 rng(3);
  const PieceTable table = PieceTable::load_tsv(fixture("spm/pieces.tsv"));
  const std::u32string pool = U"abcdefghij ▁.,éលາမ😀　";
  for (int k = 0; k < 500; ++k) {
    std::u32string s;
    for (std::size_t i = rng() % 20; i > 0; --i) s += pool[rng() % pool.size()];
    const std::string text = utf8_encode(s);
    ASSERT_EQ(sp_segment_detailed(text, table).reconstruct(), utf8_encode(marker_normalize(text)));
  }
}

TEST(SpSegment, UnknownOnlyForMissingCodepoints) {
  const PieceTable table = PieceTable::from_entries({{"▁", -1.0}, {"a", -1.0}});
  const auto seg = sp_segment_detailed("aza", table);
  ASSERT_EQ(seg.segments.size(), 4U);
  EXPECT_TRUE(seg.segments[2].unknown);
  EXPECT_EQ(seg.segments[2].piece, "<unk>");
  EXPECT_EQ(seg.segments[2].surface, "z");
  EXPECT_DOUBLE_EQ(table.unk_logprob(), -11.0);
  EXPECT_TRUE(sp_segment("", table).empty());
}

TEST(SpSegment, AgreesWithTrainedModelSegmentations) {
  const PieceTable table = PieceTable::load_tsv(fixture("spm/pieces.tsv"));
  std::istringstream in(testing::slurp(fixture("spm/segmentations.jsonl")));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto row = nlohmann::json::parse(line);
    EXPECT_EQ(sp_segment(row["text"].get<std::string>(), table), row["pieces"].get<std::vector<std::string>>())
        << row["text"];
    ++n;
  }
  EXPECT_EQ(n, 40);
}

TEST(PieceTable, TsvParsing) {
  const auto t = PieceTable::parse_tsv("# comment\n▁a\t-1.5\nb\t-2\n<unk>\t-20\n");
  EXPECT_EQ(t.size(), 2U);
  EXPECT_DOUBLE_EQ(*t.logprob("▁a"), -1.5);
  EXPECT_DOUBLE_EQ(t.unk_logprob(), -20.0);
  EXPECT_FALSE(t.logprob("zz"));
  EXPECT_THROW(PieceTable::parse_tsv("a\t-1\na\t-2\n"), Error);
  EXPECT_THROW(PieceTable::parse_tsv("a\tnope\n"), Error);
  EXPECT_THROW(PieceTable::parse_tsv("a\n"), Error);
}

}  // namespace
}  // namespace evoloop
