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

// mteval-v13a tokenization. Mirrors the regex pipeline of the reference
// scorer, applied over Unicode scalars:
//   1. ([\{-~\[-` -&\(-+:-@/])  ->  " \1 "
//   2. ([^0-9])([.,])           ->  "\1 \2 "
//   3. ([.,])([^0-9])           ->  " \1 \2"
//   4. ([0-9])(-)               ->  "\1 \2 "
// then whitespace split. Each rule is a left-to-right, non-overlapping
// substitution, so a character consumed by one match cannot start the next.

#include <string>

#include "evoloop/metrics.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_symbol(char32_t c) {
  return (c >= 0x7B && c <= 0x7E) || (c >= 0x5B && c <= 0x60) || (c >= 0x20 && c <= 0x26) ||
         (c >= 0x28 && c <= 0x2B) || (c >= 0x3A && c <= 0x40) || c == 0x2F;
}

bool is_period_comma(char32_t c) { return c == U'.' || c == U','; }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::u32string rule_symbols(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size() * 2);
  for (char32_t c : in) {
    if (is_symbol(c)) {
      out.push_back(U' ');
      out.push_back(c);
      out.push_back(U' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

// Two-character rule: when match(a, b) holds at i, emit render(a, b) and skip
// both characters.
template <typename Match, typename Render>
std::u32string rule_pair(const std::u32string& in, Match match, Render render) {
  std::u32string out;
  out.reserve(in.size() + in.size() / 2);
  std::size_t i = 0;
  while (i < in.size()) {
    if (i + 1 < in.size() && match(in[i], in[i + 1])) {
      render(out, in[i], in[i + 1]);
      i += 2;
    } else {
      out.push_back(in[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize_13a(std::string_view text) {
  std::string line(text);
  replace_all(line, "<skipped>", "");
  replace_all(line, "-\n", "");
  replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all(line, "&quot;", "\"");
    replace_all(line, "&amp;", "&");
    replace_all(line, "&lt;", "<");
    replace_all(line, "&gt;", ">");
  }

  std::u32string s = utf8_decode(" " + line + " ");
  s = rule_symbols(s);
  s = rule_pair(
      s, [](char32_t a, char32_t b) { return !is_digit(a) && is_period_comma(b); },
      [](std::u32string& out, char32_t a, char32_t b) {
        out.push_back(a);
        out.push_back(U' ');
        out.push_back(b);
        out.push_back(U' ');
      });
  s = rule_pair(
      s, [](char32_t a, char32_t b) { return is_period_comma(a) && !is_digit(b); },
      [](std::u32string& out, char32_t a, char32_t b) {
        out.push_back(U' ');
        out.push_back(a);
        out.push_back(U' ');
        out.push_back(b);
      });
  s = rule_pair(
      s, [](char32_t a, char32_t b) { return is_digit(a) && b == U'-'; },
      [](std::u32string& out, char32_t a, char32_t b) {
        out.push_back(a);
        out.push_back(U' ');
        out.push_back(b);
        out.push_back(U' ');
      });
  return split_whitespace(utf8_encode(s));
}

}  // namespace evoloop
