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

#include "evoloop/cli.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "evoloop/corpus.hpp"
#include "evoloop/curriculum.hpp"
#include "evoloop/error.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, std::string_view where) {
  if (!j.is_object()) throw Error(Errc::Config, std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw Error(Errc::Config, "unknown config key '" + std::string(where) + "." + key + "'");
  }
}

EndpointConfig endpoint_from(EndpointConfig base, const json& j, std::string_view where) {
  check_keys(j, {"base_url", "timeout_s", "max_attempts", "backoff_base_ms", "max_in_flight", "bearer_token"}, where);
  base.base_url = j.value("base_url", base.base_url);
  base.timeout_s = j.value("timeout_s", base.timeout_s);
  base.max_attempts = j.value("max_attempts", base.max_attempts);
  base.backoff_base_ms = j.value("backoff_base_ms", base.backoff_base_ms);
  base.max_in_flight = j.value("max_in_flight", base.max_in_flight);
  base.bearer_token = j.value("bearer_token", base.bearer_token);
  return base;
}

}  // namespace

RunConfig apply_config_json(RunConfig cfg, const json& j) {
  try {
    check_keys(j, {"workspace", "endpoints", "evolution", "metrics", "strict_manifests", "voices", "update_hook", "mock"},
               "config");
    if (j.contains("workspace")) cfg.workspace = j.at("workspace").get<std::string>();
    if (j.contains("endpoints")) {
      const auto& e = j.at("endpoints");
      check_keys(e, {"tts", "translate", "score"}, "endpoints");
      if (e.contains("tts")) cfg.tts = endpoint_from(cfg.tts, e.at("tts"), "endpoints.tts");
      if (e.contains("translate")) cfg.translate = endpoint_from(cfg.translate, e.at("translate"), "endpoints.translate");
      if (e.contains("score")) cfg.score = endpoint_from(cfg.score, e.at("score"), "endpoints.score");
    }
    if (j.contains("evolution")) {
      const auto& e = j.at("evolution");
      check_keys(e,
                 {"epsilon", "patience", "max_rounds", "seed", "speech_source", "fixed_eval_voice", "failure_budget",
                  "skip_degraded"},
                 "evolution");
      auto& ev = cfg.evolution;
      ev.epsilon = e.value("epsilon", ev.epsilon);
      ev.patience = e.value("patience", ev.patience);
      ev.max_rounds = e.value("max_rounds", ev.max_rounds);
      ev.seed = e.value("seed", ev.seed);
      if (e.contains("speech_source")) ev.speech_source = speech_source_from_string(e.at("speech_source").get<std::string>());
      ev.fixed_eval_voice = e.value("fixed_eval_voice", ev.fixed_eval_voice);
      ev.failure_budget = e.value("failure_budget", ev.failure_budget);
      ev.skip_degraded = e.value("skip_degraded", ev.skip_degraded);
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      check_keys(m, {"smoothing", "piece_table_path", "ratio_threshold"}, "metrics");
      if (m.contains("smoothing")) {
        const auto s = m.at("smoothing").get<std::string>();
        if (s == "exp") {
          cfg.metrics.smoothing = Smoothing::Exp;
        } else if (s == "none") {
          cfg.metrics.smoothing = Smoothing::None;
        } else {
          throw Error(Errc::Config, "metrics.smoothing must be \"exp\" or \"none\"");
        }
      }
      if (m.contains("piece_table_path")) cfg.metrics.piece_table_path = m.at("piece_table_path").get<std::string>();
      cfg.metrics.ratio_threshold = m.value("ratio_threshold", cfg.metrics.ratio_threshold);
    }
    cfg.strict_manifests = j.value("strict_manifests", cfg.strict_manifests);
    if (j.contains("voices")) cfg.voices = j.at("voices").get<std::vector<std::string>>();
    cfg.update_hook = j.value("update_hook", cfg.update_hook);
    if (j.contains("mock")) {
      const auto& m = j.at("mock");
      check_keys(m, {"scale_schedule", "drop_last_token_in_mt", "forced_tts_duration_s"}, "mock");
      if (m.contains("scale_schedule")) cfg.mock.scale_schedule = m.at("scale_schedule").get<std::vector<double>>();
      cfg.mock.drop_last_token_in_mt = m.value("drop_last_token_in_mt", cfg.mock.drop_last_token_in_mt);
      if (m.contains("forced_tts_duration_s") && !m.at("forced_tts_duration_s").is_null()) {
        cfg.mock.forced_tts_duration_s = m.at("forced_tts_duration_s").get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(Errc::Config, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return apply_config_json(std::move(base), j);
}

int exit_code_for(const Error& e) noexcept {
  switch (e.code()) {
    case Errc::Io:
    case Errc::Config:
      return 2;
    default:
      return 1;
  }
}

// ---------------------------------------------------------------------------
// Rendering helpers

namespace {

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", round1(v));
  return buf;
}

std::string signed1(double v) {
  const double r = round1(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f", r == 0.0 ? 0.0 : r);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string direction_label(const Direction& d) { return d.first + "-" + d.second; }

Direction parse_direction(std::string_view s) {
  const auto dash = s.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == s.size()) {
    throw Error(Errc::Config, "direction must look like src-tgt, got '" + std::string(s) + "'");
  }
  return {std::string(s.substr(0, dash)), std::string(s.substr(dash + 1))};
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_ascii(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedLine, path.string() + ": " + e.what(), line_no);
    }
  }
  return rows;
}

void write_json_file(const fs::path& path, const ojson& j) { write_text_atomic(path, j.dump(2) + "\n"); }

/// Rejects workspaces that cannot be written before any work starts.
void ensure_writable(const fs::path& workspace) {
  std::error_code ec;
  fs::create_directories(workspace, ec);
  const fs::path probe = workspace / ".write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw Error(Errc::Io, "workspace '" + workspace.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

struct Globals {
  std::string config_path;
  std::string workspace;
  bool mock = false;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  bool verbose = false;
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err) : out(out), err(err), verbose_(g.verbose) {
    if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
    if (const char* env = std::getenv(kWorkspaceEnv); env && *env) cfg.workspace = env;
    if (!g.workspace.empty()) cfg.workspace = g.workspace;
    if (g.seed) cfg.evolution.seed = *g.seed;
    if (g.strict) cfg.strict_manifests = true;
    mock = g.mock;
    if (mock) {
      if (cfg.voices.empty()) cfg.voices = {"mock-voice-1", "mock-voice-2", "mock-voice-3"};
      if (cfg.evolution.fixed_eval_voice.empty()) cfg.evolution.fixed_eval_voice = "mock-reference-voice";
    }
  }

  void log(std::string_view msg) const {
    if (!verbose_) return;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    err << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << msg << "\n";
  }

  LoadOptions load_options() const { return {.strict = cfg.strict_manifests}; }

  std::vector<Sample> load(const fs::path& path) const {
    std::vector<LoadWarning> warnings;
    auto samples = load_manifest(path, load_options(), &warnings);
    for (const auto& w : warnings) err << path.string() << ":" << w.line_no << ": warning: " << w.message << "\n";
    log("loaded " + std::to_string(samples.size()) + " samples from " + path.string());
    return samples;
  }

  std::unique_ptr<BackendProvider> provider(const std::vector<Sample>& lexicon_source) const {
    if (mock) {
      return std::make_unique<MockBackendProvider>(MockBackendProvider::Options{
          .workspace = cfg.workspace,
          .lexicon = MockBackendProvider::lexicon_from(lexicon_source),
          .drop_last_token_in_mt = cfg.mock.drop_last_token_in_mt,
          .scale_schedule = cfg.mock.scale_schedule,
          .forced_tts_duration_s = cfg.mock.forced_tts_duration_s,
          .endpoint = MockBackendProvider::Options{}.endpoint});
    }
    cfg.tts.validate();
    cfg.translate.validate();
    cfg.score.validate();
    return std::make_unique<HttpBackendProvider>(HttpBackendProvider::Options{
        .workspace = cfg.workspace, .tts = cfg.tts, .translate = cfg.translate, .score = cfg.score,
        .tts_model = "tts", .translator_model = "mllm", .scorer_model = "comet"});
  }

  RunConfig cfg;
  bool mock = false;
  std::ostream& out;
  std::ostream& err;

 private:
  bool verbose_ = false;
};

// ---------------------------------------------------------------------------
// validate

int cmd_validate(Context& ctx, const fs::path& manifest) {
  std::size_t n_ok = 0;
  const auto issues = validate_manifest(manifest, ctx.load_options(), n_ok);
  for (const auto& issue : issues) ctx.out << manifest.string() << ":" << issue.line_no << ": " << issue.message << "\n";
  if (issues.empty()) {
    ctx.out << n_ok << " samples OK\n";
    return 0;
  }
  ctx.out << n_ok << " samples OK, " << issues.size() << " invalid\n";
  return 1;
}

// ---------------------------------------------------------------------------
// synth / translate / score / classify

int cmd_synth(Context& ctx, const fs::path& manifest, const fs::path& out_path) {
  ensure_writable(ctx.cfg.workspace);
  const auto samples = ctx.load(manifest);
  auto provider = ctx.provider(samples);
  const BackendSet b = provider->at_generation(0);
  if (ctx.cfg.voices.empty()) throw Error(Errc::Config, "no voices configured");
  const auto acq = run_acquisition(samples, ctx.cfg.voices, ctx.cfg.evolution, *b.tts);
  write_text_atomic(out_path, to_jsonl(acq.samples));
  ctx.out << "synthesized " << acq.samples.size() << ", degraded " << acq.n_degraded << ", failed " << acq.n_failed
          << "\n";
  return acq.n_failed == 0 ? 0 : 1;
}

std::optional<AudioRef> speech_for(const Sample& s, SpeechSource source) {
  const bool synth_ok = s.synthetic_audio && !s.degraded;
  if (source == SpeechSource::PreferAuthentic && s.authentic_audio) return s.authentic_audio;
  if (synth_ok) return s.synthetic_audio;
  if (s.authentic_audio) return s.authentic_audio;
  return std::nullopt;
}

int cmd_translate(Context& ctx, const fs::path& manifest, const std::string& mode_name, const fs::path& out_path) {
  const auto samples = ctx.load(manifest);
  TranslateMode mode;
  if (mode_name == "mt") {
    mode = TranslateMode::MT;
  } else if (mode_name == "smt") {
    mode = TranslateMode::SMT;
  } else {
    throw Error(Errc::Config, "--mode must be mt or smt");
  }
  std::vector<TranslationRequest> reqs;
  for (const auto& s : samples) {
    std::optional<AudioRef> audio;
    if (mode == TranslateMode::SMT) {
      audio = speech_for(s, ctx.cfg.evolution.speech_source);
      if (!audio) throw Error(Errc::MissingAudio, "sample " + s.id + " has no usable speech");
    }
    reqs.push_back({mode, s.text, audio, s.direction()});
  }
  auto provider = ctx.provider(samples);
  const BackendSet b = provider->at_generation(0);
  const auto outcomes =
      batch(reqs, [&](const TranslationRequest& r) { return b.translator->translate_once(r); }, b.translator->endpoint());
  std::string body;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!outcomes[i].ok()) {
      ++failed;
      ctx.err << samples[i].id << ": " << outcomes[i].error->what() << "\n";
      continue;
    }
    ojson row;
    row["id"] = samples[i].id;
    row["mode"] = mode_name;
    row["hypothesis"] = outcomes[i].value->text;
    body += row.dump() + "\n";
  }
  write_text_atomic(out_path, body);
  ctx.out << "translated " << samples.size() - failed << ", failed " << failed << "\n";
  return failed == 0 ? 0 : 1;
}

std::map<std::string, std::string> load_hypotheses(const fs::path& path) {
  std::map<std::string, std::string> hyps;
  for (const auto& row : read_jsonl(path)) {
    try {
      hyps[row.at("id").get<std::string>()] = row.at("hypothesis").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedLine, path.string() + ": hypothesis rows need id and hypothesis");
    }
  }
  return hyps;
}

std::map<std::string, double> load_scores(const fs::path& path) {
  std::map<std::string, double> scores;
  for (const auto& row : read_jsonl(path)) {
    try {
      scores[row.at("id").get<std::string>()] = row.at("score").get<double>();
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedLine, path.string() + ": score rows need id and score");
    }
  }
  return scores;
}

const std::string& hypothesis_for(const std::map<std::string, std::string>& hyps, const Sample& s) {
  auto it = hyps.find(s.id);
  if (it == hyps.end()) throw Error(Errc::MissingHypotheses, "no hypothesis for sample " + s.id);
  return it->second;
}

std::vector<BatchOutcome<double>> score_all(Context& ctx, const std::vector<Sample>& samples,
                                            const std::map<std::string, std::string>& hyps) {
  std::vector<ScoreRequest> reqs;
  for (const auto& s : samples) reqs.push_back({s.text, hypothesis_for(hyps, s), s.reference});
  auto provider = ctx.provider(samples);
  const BackendSet b = provider->at_generation(0);
  return batch(reqs, [&](const ScoreRequest& r) { return b.scorer->score_once(r); }, b.scorer->endpoint());
}

int cmd_score(Context& ctx, const fs::path& manifest, const fs::path& hyp_path, const fs::path& out_path) {
  const auto samples = ctx.load(manifest);
  const auto hyps = load_hypotheses(hyp_path);
  const auto outcomes = score_all(ctx, samples, hyps);
  std::string body;
  std::size_t failed = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!outcomes[i].ok()) {
      ++failed;
      ctx.err << samples[i].id << ": " << outcomes[i].error->what() << "\n";
      continue;
    }
    sum += *outcomes[i].value;
    ojson row;
    row["id"] = samples[i].id;
    row["score"] = *outcomes[i].value;
    body += row.dump() + "\n";
  }
  write_text_atomic(out_path, body);
  const std::size_t n = samples.size() - failed;
  ctx.out << "scored " << n << ", failed " << failed << ", mean " << fixed1(n ? 100.0 * sum / n : 0.0) << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_classify(Context& ctx, const fs::path& manifest, int round) {
  ensure_writable(ctx.cfg.workspace);
  const auto samples = ctx.load(manifest);
  auto provider = ctx.provider(samples);
  const BackendSet b = provider->at_generation(0);
  const auto ref = run_refinement(samples, ctx.cfg.evolution, *b.translator, *b.scorer);
  const auto part = partition_and_emit(ref.scored, samples, round, ctx.cfg.workspace);
  for (const auto& w : part.warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << "round " << round << ": positive " << part.n_positive << ", negative " << part.n_negative << ", skipped "
          << ref.skipped_ids.size() << ", failed " << ref.failed_ids.size() << "\n";
  ctx.out << "positives " << part.positives_manifest << "\n";
  ctx.out << "negatives " << part.negatives_manifest << "\n";
  if (part.jobspec_path) ctx.out << "jobspec " << *part.jobspec_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate and direction reports

struct EvalRow {
  DirectionScore score;
  std::optional<double> under_translation;
};

std::optional<ResourceLevel> level_of(const std::string& code) {
  for (const auto& [c, level] : language_taxonomy()) {
    if (c == code) return level;
  }
  return std::nullopt;
}

ojson evaluation_report(const std::vector<EvalRow>& rows, std::string_view tokenize) {
  ojson j;
  j["tokenize"] = tokenize;
  j["rows"] = ojson::array();
  std::vector<DirectionScore> scores;
  bool all_known = true;
  for (const auto& r : rows) {
    ojson row;
    row["src"] = r.score.direction.first;
    row["tgt"] = r.score.direction.second;
    const auto level = level_of(r.score.direction.second);
    row["resource"] = level ? ojson(to_string(*level)) : ojson(nullptr);
    all_known = all_known && level.has_value();
    row["spbleu"] = r.score.spbleu;
    row["comet"] = r.score.comet;
    row["n_samples"] = r.score.n_samples;
    if (r.under_translation) row["under_translation_rate"] = *r.under_translation;
    j["rows"].push_back(row);
    scores.push_back(r.score);
  }
  const ScorePair avg = average_directions(scores);
  j["average"] = {{"spbleu", avg.spbleu}, {"comet", avg.comet}};
  if (all_known) {
    ojson groups = ojson::object();
    for (const auto& [level, pair] : aggregate_by_resource(scores)) {
      groups[std::string(to_string(level))] = {{"spbleu", pair.spbleu}, {"comet", pair.comet}};
    }
    j["by_resource"] = groups;
  }
  return j;
}

std::vector<DirectionScore> rows_of_report(const json& report) {
  std::vector<DirectionScore> rows;
  try {
    for (const auto& r : report.at("rows")) {
      rows.push_back({{r.at("src").get<std::string>(), r.at("tgt").get<std::string>()},
                      r.at("spbleu").get<double>(),
                      r.at("comet").get<double>(),
                      r.value("n_samples", std::size_t{1})});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedLine, std::string("malformed evaluation report: ") + e.what());
  }
  return rows;
}

void print_directions(std::ostream& out, const std::vector<DirectionScore>& rows) {
  out << pad("direction", 12) << "spBLEU / COMET\n";
  for (const auto& r : rows) out << pad(direction_label(r.direction), 12) << format_pair({r.spbleu, r.comet}) << "\n";
  out << pad("Avg", 12) << format_pair(average_directions(rows)) << "\n";
}

void print_resource(std::ostream& out, const std::vector<DirectionScore>& rows) {
  out << pad("resource", 12) << "spBLEU / COMET\n";
  for (const auto& [level, pair] : aggregate_by_resource(rows)) {
    out << pad(std::string(to_string(level)), 12) << format_pair(pair) << "\n";
  }
  out << pad("Avg", 12) << format_pair(average_directions(rows)) << "\n";
}

std::vector<DirectionScore> direction_scores_from_file(const fs::path& path) {
  std::vector<DirectionScore> rows;
  for (const auto& r : read_jsonl(path)) {
    try {
      rows.push_back({{r.at("src").get<std::string>(), r.at("tgt").get<std::string>()},
                      r.at("spbleu").get<double>(),
                      r.at("comet").get<double>(),
                      r.value("n_samples", std::size_t{1})});
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedLine, path.string() + ": direction rows need src, tgt, spbleu, comet");
    }
  }
  return rows;
}

struct EvaluateArgs {
  std::string manifest;
  std::string hyp;
  std::string scores;
  std::string direction_scores;
  std::vector<std::string> directions;
  std::string tokenize = "spm";
  std::string piece_table;
  std::string report;
  std::string group = "direction";
};

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  std::set<Direction> keep;
  for (const auto& d : a.directions) keep.insert(parse_direction(d));
  auto wanted = [&](const Direction& d) { return keep.empty() || keep.contains(d); };

  std::vector<EvalRow> rows;
  std::string tokenize = a.tokenize;
  if (!a.direction_scores.empty()) {
    tokenize = "precomputed";
    for (auto& r : direction_scores_from_file(a.direction_scores)) {
      if (wanted(r.direction)) rows.push_back({r, std::nullopt});
    }
  } else {
    if (a.hyp.empty()) throw Error(Errc::MissingHypotheses, "evaluate needs --hyp or --direction-scores");
    if (a.manifest.empty()) throw Error(Errc::Config, "evaluate --hyp needs a manifest");
    std::optional<PieceTable> table;
    BleuTokenizer tok = Tok13a{};
    if (a.tokenize == "spm") {
      std::optional<fs::path> path = ctx.cfg.metrics.piece_table_path;
      if (!a.piece_table.empty()) path = a.piece_table;
      if (!path) throw Error(Errc::Config, "spBLEU needs --piece-table or metrics.piece_table_path");
      table = PieceTable::load_tsv(*path);
      tok = TokSpPieces{&*table};
    } else if (a.tokenize != "13a") {
      throw Error(Errc::Config, "--tokenize must be spm or 13a");
    }
    const auto samples = ctx.load(a.manifest);
    const auto hyps = load_hypotheses(a.hyp);
    std::vector<Sample> selected;
    for (const auto& s : samples) {
      if (wanted(s.direction())) selected.push_back(s);
    }
    for (const auto& s : selected) hypothesis_for(hyps, s);

    std::map<std::string, double> comet;
    if (!a.scores.empty()) {
      comet = load_scores(a.scores);
    } else {
      const auto outcomes = score_all(ctx, selected, hyps);
      for (std::size_t i = 0; i < selected.size(); ++i) {
        if (!outcomes[i].ok()) throw *outcomes[i].error;
        comet[selected[i].id] = *outcomes[i].value;
      }
    }
    for (const auto& [dir, group] : split_directions(selected)) {
      std::vector<std::string> h;
      std::vector<std::string> r;
      std::vector<std::pair<std::string, std::string>> pairs;
      double csum = 0.0;
      for (const auto& s : group) {
        h.push_back(hyps.at(s.id));
        r.push_back(s.reference);
        pairs.emplace_back(hyps.at(s.id), s.reference);
        auto it = comet.find(s.id);
        if (it == comet.end()) throw Error(Errc::MissingHypotheses, "no score for sample " + s.id);
        csum += it->second;
      }
      const BleuResult bleu = corpus_bleu(h, r, tok, ctx.cfg.metrics.smoothing);
      rows.push_back({{dir, bleu.score, csum / static_cast<double>(group.size()), group.size()},
                      under_translation_rate(pairs, dir.second, ctx.cfg.metrics.ratio_threshold)});
    }
  }
  if (rows.empty()) throw Error(Errc::EmptyInput, "no directions to evaluate");

  std::vector<DirectionScore> scores;
  for (const auto& r : rows) scores.push_back(r.score);
  if (a.group == "resource") {
    print_resource(ctx.out, scores);
  } else if (a.group == "direction") {
    print_directions(ctx.out, scores);
  } else {
    throw Error(Errc::Config, "--group must be direction or resource");
  }
  if (!a.report.empty()) write_json_file(a.report, evaluation_report(rows, tokenize));
  return 0;
}

int cmd_report_directions(Context& ctx, const fs::path& report, bool by_resource) {
  json j;
  try {
    j = json::parse(read_text(report));
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedLine, "report '" + report.string() + "' is not valid JSON");
  }
  const auto rows = rows_of_report(j);
  if (rows.empty()) throw Error(Errc::EmptyInput, "report has no rows");
  if (by_resource) {
    print_resource(ctx.out, rows);
  } else {
    print_directions(ctx.out, rows);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// loop and round reports

struct LoopArgs {
  std::string train;
  std::string eval;
  std::vector<std::string> voices;
  std::string eval_voice;
  std::optional<int> max_rounds;
  std::optional<double> epsilon;
  std::optional<int> patience;
  std::string hook;
  std::vector<double> scale_schedule;
  std::string report;
  std::string interrupt_after;
};

std::string round_line(const RoundState& s) {
  std::ostringstream line;
  line << "round " << s.round_index << "  positive " << s.n_positive << "  negative " << s.n_negative << "  eval "
       << fixed1(100.0 * s.eval_score) << "  delta " << signed1(100.0 * s.delta_vs_best) << "  "
       << to_string(s.status);
  return line.str();
}

Phase phase_from_string(std::string_view s) {
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto p : {Phase::Acquisition, Phase::Refinement, Phase::Partition, Phase::Update, Phase::Evaluation}) {
    if (to_string(p) == lower) return p;
  }
  throw Error(Errc::Config, "unknown phase '" + std::string(s) + "'");
}

int cmd_loop(Context& ctx, const LoopArgs& a) {
  auto& cfg = ctx.cfg;
  if (!a.voices.empty()) cfg.voices = a.voices;
  if (!a.eval_voice.empty()) cfg.evolution.fixed_eval_voice = a.eval_voice;
  if (a.max_rounds) cfg.evolution.max_rounds = *a.max_rounds;
  if (a.epsilon) cfg.evolution.epsilon = *a.epsilon;
  if (a.patience) cfg.evolution.patience = *a.patience;
  if (!a.hook.empty()) cfg.update_hook = a.hook;
  if (!a.scale_schedule.empty()) cfg.mock.scale_schedule = a.scale_schedule;
  cfg.evolution.validate();
  ensure_writable(cfg.workspace);

  const auto train = ctx.load(a.train);
  const auto eval = ctx.load(a.eval);
  std::vector<Sample> all = train;
  all.insert(all.end(), eval.begin(), eval.end());
  auto provider = ctx.provider(all);

  NoopUpdateHook noop;
  std::optional<ShellUpdateHook> shell;
  if (!cfg.update_hook.empty()) shell.emplace(cfg.update_hook);
  UpdateHook& hook = shell ? static_cast<UpdateHook&>(*shell) : noop;

  EvolutionLoop loop(cfg.workspace, cfg.evolution, *provider, hook);
  if (!a.interrupt_after.empty()) {
    const auto colon = a.interrupt_after.find(':');
    if (colon == std::string::npos) throw Error(Errc::Config, "--interrupt-after wants ROUND:PHASE");
    loop.interrupt_after(std::stoi(a.interrupt_after.substr(0, colon)),
                         phase_from_string(a.interrupt_after.substr(colon + 1)));
  }
  const auto history = loop.run(train, eval, cfg.voices);
  for (const auto& r : loop.phase_reports()) {
    ctx.log("round " + std::to_string(r.round_index) + " " + std::string(to_string(r.phase)) +
            (r.replayed ? " (replayed)" : "") + ": requests " + std::to_string(r.requests()) + ", cache hits " +
            std::to_string(r.cache_hits()) + "/" + std::to_string(r.lookups()));
  }
  for (const auto& s : history) ctx.out << round_line(s) << "\n";
  if (!a.report.empty()) {
    ojson j;
    j["baseline"] = loop.baseline_score();
    j["rounds"] = ojson::array();
    for (const auto& s : history) j["rounds"].push_back(to_json(s));
    write_json_file(a.report, j);
  }
  return 0;
}

struct RoundsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RoundsTable rounds_table(const RoundHistory& h) {
  std::set<std::string> targets;
  for (const auto& [t, _] : h.baseline_by_target) targets.insert(t);
  for (const auto& r : h.rounds) {
    for (const auto& [t, _] : r.eval_by_target) targets.insert(t);
  }
  const bool per_target = targets.size() > 1;

  RoundsTable t;
  t.header = {"round", "eval", "delta", "status"};
  if (per_target) {
    for (const auto& tgt : targets) {
      t.header.push_back("eval[" + tgt + "]");
      t.header.push_back("delta[" + tgt + "]");
    }
  }
  std::map<std::string, double> best = h.baseline_by_target;
  for (const auto& r : h.rounds) {
    std::vector<std::string> row{std::to_string(r.round_index), fixed1(100.0 * r.eval_score),
                                 signed1(100.0 * r.delta_vs_best), std::string(to_string(r.status))};
    if (per_target) {
      for (const auto& tgt : targets) {
        auto it = r.eval_by_target.find(tgt);
        if (it == r.eval_by_target.end()) {
          row.insert(row.end(), {"", ""});
          continue;
        }
        auto b = best.find(tgt);
        const double delta = b == best.end() ? 0.0 : it->second - b->second;
        row.push_back(fixed1(100.0 * it->second));
        row.push_back(signed1(100.0 * delta));
        best[tgt] = b == best.end() ? it->second : std::max(b->second, it->second);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

int cmd_report_rounds(Context& ctx, const std::string& csv, const std::string& json_out) {
  const RoundHistory h = load_round_history(ctx.cfg.workspace);
  const RoundsTable t = rounds_table(h);
  std::vector<std::size_t> width(t.header.size());
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    width[c] = t.header[c].size();
    for (const auto& row : t.rows) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) line += (c ? "  " : "") + pad(cells[c], width[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    ctx.out << line << "\n";
  };
  ctx.out << "baseline " << fixed1(100.0 * h.baseline) << "\n";
  emit(t.header);
  for (const auto& row : t.rows) emit(row);

  if (!csv.empty()) {
    std::string body;
    auto csv_line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) body += (c ? "," : "") + cells[c];
      body += "\n";
    };
    csv_line(t.header);
    for (const auto& row : t.rows) csv_line(row);
    write_text_atomic(csv, body);
  }
  if (!json_out.empty()) {
    ojson j;
    j["baseline"] = h.baseline;
    j["baseline_by_target"] = h.baseline_by_target;
    j["rounds"] = ojson::array();
    for (const auto& r : h.rounds) {
      ojson row;
      row["round_index"] = r.round_index;
      row["eval_score"] = r.eval_score;
      row["delta_vs_best"] = r.delta_vs_best;
      row["status"] = to_string(r.status);
      row["eval_by_target"] = r.eval_by_target;
      j["rounds"].push_back(row);
    }
    write_json_file(json_out, j);
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech-guided translation self-evolution toolkit", "evoloop"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "evoloop 0.1.0");

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->option_text("FILE");
  app.add_option("--workspace", g.workspace, "Workspace directory (overrides config and EVOLOOP_WORKSPACE)");
  app.add_flag("--mock", g.mock, "Use the in-process mock backends");
  app.add_option("--seed", g.seed, "Seed for voice assignment");
  app.add_flag("--strict", g.strict, "Reject unknown manifest keys");
  app.add_flag("-v,--verbose", g.verbose, "Timestamped log lines on stderr");

  std::string manifest;
  std::string out_path;
  std::string hyp;
  std::string mode;
  int round = 1;

  auto* validate = app.add_subcommand("validate", "Check a JSONL manifest line by line");
  validate->add_option("manifest", manifest)->required();

  auto* synth = app.add_subcommand("synth", "Synthesize speech for every sample");
  synth->add_option("manifest", manifest)->required();
  synth->add_option("--out", out_path, "Output manifest")->required();
  std::vector<std::string> synth_voices;
  synth->add_option("--voice", synth_voices, "Voice pool (repeatable)");

  auto* translate = app.add_subcommand("translate", "Translate every sample in MT or SMT mode");
  translate->add_option("manifest", manifest)->required();
  translate->add_option("--mode", mode, "mt or smt")->required();
  translate->add_option("--out", out_path, "Hypotheses JSONL")->required();

  auto* score = app.add_subcommand("score", "Score hypotheses against references");
  score->add_option("manifest", manifest)->required();
  score->add_option("--hyp", hyp, "Hypotheses JSONL")->required();
  score->add_option("--out", out_path, "Scores JSONL")->required();

  auto* classify = app.add_subcommand("classify", "Label samples Positive/Negative and emit a training job");
  classify->add_option("manifest", manifest)->required();
  classify->add_option("--round", round, "Round index")->check(CLI::PositiveNumber);

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Per-direction spBLEU / COMET table");
  evaluate->add_option("manifest", ea.manifest);
  evaluate->add_option("--hyp", ea.hyp, "Hypotheses JSONL");
  evaluate->add_option("--scores", ea.scores, "Per-sample scores JSONL (else the scorer is called)");
  evaluate->add_option("--direction-scores", ea.direction_scores, "Precomputed per-direction rows JSONL");
  evaluate->add_option("--direction", ea.directions, "Keep only src-tgt (repeatable)");
  evaluate->add_option("--tokenize", ea.tokenize, "spm or 13a");
  evaluate->add_option("--piece-table", ea.piece_table, "Piece table TSV for spBLEU");
  evaluate->add_option("--report", ea.report, "Write a JSON report");
  evaluate->add_option("--group", ea.group, "direction or resource");

  LoopArgs la;
  auto* loop = app.add_subcommand("loop", "Run the self-evolution loop");
  loop->add_option("--train", la.train, "Training manifest")->required();
  loop->add_option("--eval", la.eval, "Evaluation manifest")->required();
  loop->add_option("--voice", la.voices, "Voice pool (repeatable)");
  loop->add_option("--eval-voice", la.eval_voice, "Fixed evaluation voice");
  loop->add_option("--max-rounds", la.max_rounds, "Stop after this many rounds");
  loop->add_option("--epsilon", la.epsilon, "Minimum gain on the [0,1] scale");
  loop->add_option("--patience", la.patience, "Sub-epsilon rounds before convergence");
  loop->add_option("--hook", la.hook, "Update command; {jobspec} expands to the JobSpec path");
  loop->add_option("--scale-schedule", la.scale_schedule, "Mock scorer scale per generation")->delimiter(',');
  loop->add_option("--report", la.report, "Write a JSON report");
  loop->add_option("--interrupt-after", la.interrupt_after)->group("");

  auto* report = app.add_subcommand("report", "Render reports");
  report->require_subcommand(1);
  std::string csv;
  std::string json_out;
  auto* rounds = report->add_subcommand("rounds", "Per-round gains from the workspace journals");
  rounds->add_option("--csv", csv, "Also write CSV");
  rounds->add_option("--json", json_out, "Also write JSON (full precision)");
  std::string report_file;
  auto* resource = report->add_subcommand("resource", "Low/Med/High averages of an evaluation report");
  resource->add_option("report", report_file)->required();
  auto* directions = report->add_subcommand("directions", "Per-direction rows of an evaluation report");
  directions->add_option("report", report_file)->required();

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  if (storage.empty()) storage.emplace_back("evoloop");
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    Context ctx(g, out, err);
    if (*validate) return cmd_validate(ctx, manifest);
    if (*synth) {
      if (!synth_voices.empty()) ctx.cfg.voices = synth_voices;
      return cmd_synth(ctx, manifest, out_path);
    }
    if (*translate) return cmd_translate(ctx, manifest, mode, out_path);
    if (*score) return cmd_score(ctx, manifest, hyp, out_path);
    if (*classify) return cmd_classify(ctx, manifest, round);
    if (*evaluate) return cmd_evaluate(ctx, ea);
    if (*loop) return cmd_loop(ctx, la);
    if (*rounds) return cmd_report_rounds(ctx, csv, json_out);
    if (*resource) return cmd_report_directions(ctx, report_file, true);
    if (*directions) return cmd_report_directions(ctx, report_file, false);
  } catch (const Error& e) {
    err << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace evoloop
