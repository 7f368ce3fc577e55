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

#include "evoloop/text.hpp"
#include "oracles.hpp"

namespace evoloop {
namespace {

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_raw("abc").size(), 32U);
}

TEST(Sha256, MatchesReferenceImplementationOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s(rng() % 200, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xFF);
    ASSERT_EQ(sha256_hex(s), testing::oracle_sha256_hex(s)) << "length " << s.size();
  }
}

TEST(Utf8, DecodeReplacesInvalidBytes) {
  const std::u32string d = utf8_decode("a\xff" "b");
  ASSERT_EQ(d.size(), 3U);
  EXPECT_EQ(d[1], U'�');
  EXPECT_FALSE(utf8_valid("\xc3"));
  EXPECT_TRUE(utf8_valid("ក្រុង"));
}

TEST(Utf8, EncodeDecodeRoundTrip) {
  const std::string s = "naïve ▁ ລາວ 𝄞";
  EXPECT_EQ(utf8_encode(utf8_decode(s)), s);
  EXPECT_EQ(scalar_count(s), 13U);
}

TEST(Whitespace, SplitsOnUnicodeSpaces) {
  const auto parts = split_whitespace("  one two　three\t\n");
  ASSERT_EQ(parts.size(), 3U);
  EXPECT_EQ(parts[2], "three");
  EXPECT_EQ(trim_ascii("  x y \n"), "x y");
}

}  // namespace
}  // namespace evoloop
