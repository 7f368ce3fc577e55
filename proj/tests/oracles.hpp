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

// Test-only reference implementations. None of these share code paths
// with the library; each one is the slow, obvious way to compute a value.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evoloop::testing {

/// FIPS 180-4 SHA-256, lowercase hex.
std::string oracle_sha256_hex(std::string_view bytes);

/// Compact JSON array of the four strings, escaping only what a minimal
/// JSON writer must: quote, backslash and control characters.
std::string oracle_canonical_json(const std::vector<std::string>& fields);

struct OracleBleu {
  double score = 0.0;  // [0,100]
  double brevity_penalty = 0.0;
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
};

/// Unsmoothed corpus BLEU over pre-tokenized segments, counting clipped
/// n-gram matches by linear scans and combining precisions by product.
OracleBleu oracle_bleu(const std::vector<std::vector<std::string>>& hyps,
                       const std::vector<std::vector<std::string>>& refs);

/// "▁"-joined words with one leading marker; blank input gives "".
std::u32string oracle_marker_normalize(std::string_view text);

/// Best total log-probability over every split of `normalized` into table
/// pieces, with an unknown piece allowed only for a single codepoint that
/// is absent from the table. Enumerates all 2^(n-1) splits.
double oracle_best_segmentation(const std::u32string& normalized, const std::map<std::u32string, double>& table,
                                double unk_logprob);

/// Harmonic mean of clipped whitespace-token precision and recall.
double oracle_token_f1(std::string_view hypothesis, std::string_view reference);

/// Mean of values per key, for group-by checks.
std::map<std::string, double> oracle_group_mean(const std::vector<std::pair<std::string, double>>& rows);

/// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path fixture(std::string_view relative);
std::string slurp(const std::filesystem::path& path);

}  // namespace evoloop::testing
