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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "evoloop/error.hpp"
#include "evoloop/metrics.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace {

constexpr double kUnkPenalty = 10.0;

double parse_double(std::string_view s, std::size_t line_no) {
  std::string tmp(trim_ascii(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tmp, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (tmp.empty() || used != tmp.size()) {
    throw Error(Errc::InvalidPieceTable, "line " + std::to_string(line_no) + ": bad log-probability '" + tmp + "'",
                line_no);
  }
  return v;
}

}  // namespace

PieceTable PieceTable::from_entries(const std::vector<std::pair<std::string, double>>& entries,
                                    std::string unk_piece, std::optional<double> unk_logprob) {
  PieceTable t;
  t.unk_piece_ = std::move(unk_piece);
  double min_lp = 0.0;
  for (const auto& [piece, lp] : entries) {
    if (piece.empty()) throw Error(Errc::InvalidPieceTable, "empty piece");
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(Errc::InvalidPieceTable, "log-probability of '" + piece + "' must be finite and <= 0");
    }
    if (!utf8_valid(piece)) throw Error(Errc::InvalidPieceTable, "piece is not valid UTF-8");
    if (!t.pieces_.emplace(piece, lp).second) {
      throw Error(Errc::InvalidPieceTable, "duplicate piece '" + piece + "'");
    }
    t.max_len_ = std::max(t.max_len_, scalar_count(piece));
    min_lp = std::min(min_lp, lp);
  }
  t.unk_logprob_ = unk_logprob.value_or(min_lp - kUnkPenalty);
  if (!std::isfinite(t.unk_logprob_) || t.unk_logprob_ > 0.0) {
    throw Error(Errc::InvalidPieceTable, "unk log-probability must be finite and <= 0");
  }
  return t;
}

PieceTable PieceTable::parse_tsv(std::string_view contents) {
  std::vector<std::pair<std::string, double>> entries;
  std::optional<double> unk_lp;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(Errc::InvalidPieceTable, "line " + std::to_string(line_no) + ": expected piece<TAB>logprob",
                  line_no);
    }
    std::string piece = line.substr(0, tab);
    const double lp = parse_double(std::string_view(line).substr(tab + 1), line_no);
    if (piece == "<unk>") {
      if (unk_lp) throw Error(Errc::InvalidPieceTable, "duplicate piece '<unk>'", line_no);
      unk_lp = lp;
      continue;
    }
    entries.emplace_back(std::move(piece), lp);
  }
  try {
    return from_entries(entries, "<unk>", unk_lp);
  } catch (const Error& e) {
    throw Error(Errc::InvalidPieceTable, e.what());
  }
}

PieceTable PieceTable::load_tsv(const std::filesystem::path& path) {
  return parse_tsv(read_text(path));
}

std::optional<double> PieceTable::logprob(std::string_view piece) const {
  auto it = pieces_.find(std::string(piece));
  if (it == pieces_.end()) return std::nullopt;
  return it->second;
}

std::u32string marker_normalize(std::string_view text) {
  std::u32string out;
  const std::string_view trimmed = trim_ascii(text);
  if (trimmed.empty()) return out;
  out.push_back(kSpaceMarker);
  bool pending_space = false;
  for (char32_t c : utf8_decode(trimmed)) {
    if (c == U' ') {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(kSpaceMarker);
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> Segmentation::pieces() const {
  std::vector<std::string> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.piece);
  return out;
}

std::string Segmentation::reconstruct() const {
  std::string out;
  for (const auto& s : segments) out += s.surface;
  return out;
}

Segmentation sp_segment_detailed(std::string_view text, const PieceTable& table) {
  const std::u32string norm = marker_normalize(text);
  const std::size_t n = norm.size();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  struct Cell {
    double score = kNegInf;
    std::size_t start = 0;
    bool unknown = false;
  };
  std::vector<Cell> best(n + 1);
  best[0].score = 0.0;

  // Encoded prefix offsets so candidate pieces are byte substrings.
  std::string bytes;
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    offset[i] = bytes.size();
    bytes += utf8_encode(norm[i]);
  }
  offset[n] = bytes.size();

  const std::size_t max_len = std::max<std::size_t>(1, table.max_piece_scalars());
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i].score == kNegInf) continue;
    bool single_known = false;
    for (std::size_t len = 1; len <= max_len && i + len <= n; ++len) {
      const std::string_view cand(bytes.data() + offset[i], offset[i + len] - offset[i]);
      const auto lp = table.logprob(cand);
      if (!lp) continue;
      if (len == 1) single_known = true;
      const double score = best[i].score + *lp;
      if (score > best[i + len].score) best[i + len] = {score, i, false};
    }
    if (!single_known) {
      const double score = best[i].score + table.unk_logprob();
      if (score > best[i + 1].score) best[i + 1] = {score, i, true};
    }
  }

  Segmentation seg;
  seg.logprob = best[n].score;
  for (std::size_t end = n; end > 0;) {
    const Cell& c = best[end];
    std::string surface(bytes.substr(offset[c.start], offset[end] - offset[c.start]));
    seg.segments.push_back({c.unknown ? table.unk_piece() : surface, std::move(surface), c.unknown});
    end = c.start;
  }
  std::reverse(seg.segments.begin(), seg.segments.end());
  return seg;
}

std::vector<std::string> sp_segment(std::string_view text, const PieceTable& table) {
  return sp_segment_detailed(text, table).pieces();
}

}  // namespace evoloop
