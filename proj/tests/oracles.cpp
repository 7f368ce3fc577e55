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

#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef EVOLOOP_FIXTURES
#define EVOLOOP_FIXTURES "tests/fixtures"
#endif

namespace evoloop::testing {

namespace {

constexpr std::array<std::uint32_t, 64> kK = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

}  // namespace

std::string oracle_sha256_hex(std::string_view bytes) {
  std::vector<std::uint8_t> msg(bytes.begin(), bytes.end());
  const std::uint64_t bit_len = static_cast<std::uint64_t>(msg.size()) * 8;
  msg.push_back(0x80);
  while (msg.size() % 64 != 56) msg.push_back(0);
  for (int i = 7; i >= 0; --i) msg.push_back(static_cast<std::uint8_t>(bit_len >> (8 * i)));

  std::array<std::uint32_t, 8> h = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                    0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  for (std::size_t off = 0; off < msg.size(); off += 64) {
    std::array<std::uint32_t, 64> w{};
    for (int t = 0; t < 16; ++t) {
      w[t] = (std::uint32_t(msg[off + 4 * t]) << 24) | (std::uint32_t(msg[off + 4 * t + 1]) << 16) |
             (std::uint32_t(msg[off + 4 * t + 2]) << 8) | std::uint32_t(msg[off + 4 * t + 3]);
    }
    for (int t = 16; t < 64; ++t) {
      const std::uint32_t s0 = rotr(w[t - 15], 7) ^ rotr(w[t - 15], 18) ^ (w[t - 15] >> 3);
      const std::uint32_t s1 = rotr(w[t - 2], 17) ^ rotr(w[t - 2], 19) ^ (w[t - 2] >> 10);
      w[t] = w[t - 16] + s0 + w[t - 7] + s1;
    }
    auto [a, b, c, d, e, f, g, hh] = h;
    for (int t = 0; t < 64; ++t) {
      const std::uint32_t t1 = hh + (rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25)) + ((e & f) ^ (~e & g)) + kK[t] + w[t];
      const std::uint32_t t2 = (rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22)) + ((a & b) ^ (a & c) ^ (b & c));
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }
  std::string out;
  char buf[9];
  for (auto v : h) {
    std::snprintf(buf, sizeof buf, "%08x", v);
    out += buf;
  }
  return out;
}

std::string oracle_canonical_json(const std::vector<std::string>& fields) {
  std::string out = "[";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += '"';
    for (unsigned char ch : fields[i]) {
      switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
          if (ch < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", ch);
            out += buf;
          } else {
            out += static_cast<char>(ch);
          }
      }
    }
    out += '"';
  }
  return out + "]";
}

OracleBleu oracle_bleu(const std::vector<std::vector<std::string>>& hyps,
                       const std::vector<std::vector<std::string>>& refs) {
  OracleBleu r;
  r.matches.assign(4, 0);
  r.totals.assign(4, 0);
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& g = refs[s];
    r.sys_len += h.size();
    r.ref_len += g.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      if (h.size() < n) continue;
      r.totals[n - 1] += h.size() - n + 1;
      auto gram = [n](const std::vector<std::string>& v, std::size_t i) {
        return std::vector<std::string>(v.begin() + static_cast<long>(i), v.begin() + static_cast<long>(i + n));
      };
      std::vector<std::vector<std::string>> seen;
      for (std::size_t i = 0; i + n <= h.size(); ++i) {
        auto cand = gram(h, i);
        if (std::find(seen.begin(), seen.end(), cand) != seen.end()) continue;
        seen.push_back(cand);
        std::size_t in_h = 0;
        std::size_t in_g = 0;
        for (std::size_t j = 0; j + n <= h.size(); ++j) in_h += gram(h, j) == cand;
        for (std::size_t j = 0; j + n <= g.size(); ++j) in_g += gram(g, j) == cand;
        r.matches[n - 1] += std::min(in_h, in_g);
      }
    }
  }
  if (r.sys_len == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.sys_len < r.ref_len) {
    r.brevity_penalty = std::exp(1.0 - double(r.ref_len) / double(r.sys_len));
  } else {
    r.brevity_penalty = 1.0;
  }
  double product = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (r.totals[n] == 0 || r.matches[n] == 0) {
      product = 0.0;
      break;
    }
    product *= double(r.matches[n]) / double(r.totals[n]);
  }
  r.score = 100.0 * r.brevity_penalty * std::pow(product, 0.25);
  return r;
}

std::u32string oracle_marker_normalize(std::string_view text) {
  std::u32string out;
  std::string word;
  std::vector<std::string> words;
  for (char c : text) {
    if (c == ' ') {
      if (!word.empty()) words.push_back(word);
      word.clear();
    } else {
      word += c;
    }
  }
  if (!word.empty()) words.push_back(word);
  for (const auto& w : words) {
    out += U'▁';
    for (unsigned char c : w) {
      if (c >= 0x80) throw std::invalid_argument("oracle normalizer is ASCII-only");
      out += static_cast<char32_t>(c);
    }
  }
  return out;
}

double oracle_best_segmentation(const std::u32string& s, const std::map<std::u32string, double>& table,
                                double unk_logprob) {
  if (s.empty()) return 0.0;
  const std::size_t n = s.size();
  double best = -INFINITY;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    double total = 0.0;
    std::size_t start = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const bool cut = i == n - 1 || ((mask >> i) & 1U);
      if (!cut) continue;
      const std::u32string piece = s.substr(start, i + 1 - start);
      if (auto it = table.find(piece); it != table.end()) {
        total += it->second;
      } else if (piece.size() == 1) {
        total += unk_logprob;
      } else {
        ok = false;
      }
      start = i + 1;
    }
    if (ok) best = std::max(best, total);
  }
  return best;
}

double oracle_token_f1(std::string_view hypothesis, std::string_view reference) {
  auto words = [](std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
  };
  const auto h = words(hypothesis);
  auto r = words(reference);
  if (h.empty() || r.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : h) {
    auto it = std::find(r.begin(), r.end(), w);
    if (it != r.end()) {
      ++common;
      r.erase(it);
    }
  }
  if (common == 0) return 0.0;
  const double p = double(common) / double(h.size());
  const double rc = double(common) / double(words(reference).size());
  return 2 * p * rc / (p + rc);
}

std::map<std::string, double> oracle_group_mean(const std::vector<std::pair<std::string, double>>& rows) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [k, v] : rows) {
    acc[k].first += v;
    acc[k].second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / a.second;
  return out;
}

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    path_ = std::filesystem::temp_directory_path() / ("evoloop-test-" + std::to_string(rng()));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path fixture(std::string_view relative) { return std::filesystem::path(EVOLOOP_FIXTURES) / relative; }

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace evoloop::testing
