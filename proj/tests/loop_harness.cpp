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

#include "loop_harness.hpp"

#include <sstream>

#include "oracles.hpp"

namespace evoloop::testing {

namespace fs = std::filesystem;

LoopFixture load_loop_fixture() {
  LoopFixture fx;
  fx.train = load_manifest(fixture("loop/train.jsonl"));
  fx.eval = load_manifest(fixture("loop/eval.jsonl"));
  return fx;
}

const std::vector<double>& staged_schedule() {
  static const std::vector<double> s{0.800, 0.819, 0.839, 0.856, 0.8565};
  return s;
}

EvolutionConfig loop_config(int max_rounds, std::uint64_t seed) {
  EvolutionConfig cfg;
  cfg.max_rounds = max_rounds;
  cfg.seed = seed;
  cfg.fixed_eval_voice = "mock-reference-voice";
  return cfg;
}

MockBackendProvider::Options mock_options(const fs::path& ws, const LoopFixture& fx, std::vector<double> schedule) {
  std::vector<Sample> all = fx.train;
  all.insert(all.end(), fx.eval.begin(), fx.eval.end());
  MockBackendProvider::Options o;
  o.workspace = ws;
  o.lexicon = MockBackendProvider::lexicon_from(all);
  o.scale_schedule = std::move(schedule);
  return o;
}

std::map<std::string, std::string> journal_snapshot(const fs::path& ws) {
  std::map<std::string, std::string> out;
  for (const char* f : {"journal.json", "baseline.json"}) {
    if (fs::exists(ws / f)) out[f] = slurp(ws / f);
  }
  if (fs::exists(ws / "rounds")) {
    for (const auto& e : fs::recursive_directory_iterator(ws / "rounds")) {
      if (e.is_regular_file()) out[fs::relative(e.path(), ws).generic_string()] = slurp(e.path());
    }
  }
  return out;
}

namespace {

std::vector<nlohmann::json> rows(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace

std::set<std::string> purity_violations(const fs::path& ws) {
  std::set<std::string> negative;
  std::set<std::string> trained;
  if (!fs::exists(ws / "rounds")) return {};
  for (const auto& e : fs::recursive_directory_iterator(ws / "rounds")) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename();
    if (name == "scored.jsonl") {
      for (const auto& r : rows(e.path())) {
        if (r.at("label") == "Negative") negative.insert(r.at("sample_id").get<std::string>());
      }
    } else if (name == "jobspec.json") {
      const auto spec = nlohmann::json::parse(slurp(e.path()));
      for (const auto& d : spec.at("datasets")) {
        for (const auto& r : rows(ws / d.get<std::string>())) trained.insert(r.at("id").get<std::string>());
      }
    }
  }
  std::set<std::string> bad;
  for (const auto& id : negative) {
    if (trained.count(id)) bad.insert(id);
  }
  return bad;
}

std::size_t count_jobspecs(const fs::path& ws) {
  std::size_t n = 0;
  if (!fs::exists(ws / "rounds")) return 0;
  for (const auto& e : fs::recursive_directory_iterator(ws / "rounds")) {
    n += e.path().filename() == "jobspec.json" ? 1 : 0;
  }
  return n;
}

}  // namespace evoloop::testing
