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

#include "evoloop/evolution.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include "evoloop/error.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(Label label) noexcept { return label == Label::Positive ? "Positive" : "Negative"; }

std::string_view to_string(RoundStatus status) noexcept {
  switch (status) {
    case RoundStatus::Improved: return "Improved";
    case RoundStatus::Plateau: return "Plateau";
    case RoundStatus::Converged: return "Converged";
    case RoundStatus::MaxRounds: return "MaxRounds";
  }
  return "?";
}

std::string_view to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::Acquisition: return "acquisition";
    case Phase::Refinement: return "refinement";
    case Phase::Partition: return "partition";
    case Phase::Update: return "update";
    case Phase::Evaluation: return "evaluation";
  }
  return "?";
}

std::string_view to_string(SpeechSource source) noexcept {
  return source == SpeechSource::PreferSynthetic ? "PreferSynthetic" : "PreferAuthentic";
}

RoundStatus round_status_from_string(std::string_view s) {
  for (auto st : {RoundStatus::Improved, RoundStatus::Plateau, RoundStatus::Converged, RoundStatus::MaxRounds}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::Config, "unknown round status '" + std::string(s) + "'");
}

SpeechSource speech_source_from_string(std::string_view s) {
  if (s == "PreferSynthetic") return SpeechSource::PreferSynthetic;
  if (s == "PreferAuthentic") return SpeechSource::PreferAuthentic;
  throw Error(Errc::Config, "unknown speech_source '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Records

void EvolutionConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(Errc::Config, "epsilon must be > 0");
  if (patience < 1) throw Error(Errc::Config, "patience must be >= 1");
  if (max_rounds < 1) throw Error(Errc::Config, "max_rounds must be >= 1");
  if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) throw Error(Errc::Config, "failure_budget must lie in [0,1]");
}

ojson to_json(const EvolutionConfig& c) {
  ojson j;
  j["epsilon"] = c.epsilon;
  j["patience"] = c.patience;
  j["max_rounds"] = c.max_rounds;
  j["seed"] = c.seed;
  j["speech_source"] = to_string(c.speech_source);
  j["fixed_eval_voice"] = c.fixed_eval_voice;
  j["failure_budget"] = c.failure_budget;
  j["skip_degraded"] = c.skip_degraded;
  return j;
}

ojson to_json(const ScoredSample& s) {
  ojson j;
  j["sample_id"] = s.sample_id;
  j["speech_used"] = s.speech_used == AudioOrigin::Synthetic ? "Synthetic" : "Authentic";
  j["s1"] = s.s1;
  j["s2"] = s.s2;
  j["label"] = to_string(s.label);
  return j;
}

ScoredSample scored_from_json(const nlohmann::json& j) {
  ScoredSample s;
  try {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.speech_used = j.at("speech_used").get<std::string>() == "Authentic" ? AudioOrigin::Authentic
                                                                          : AudioOrigin::Synthetic;
    s.s1 = j.at("s1").get<double>();
    s.s2 = j.at("s2").get<double>();
    s.label = j.at("label").get<std::string>() == "Positive" ? Label::Positive : Label::Negative;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedLine, std::string("malformed scored sample: ") + e.what());
  }
  if (s.label != classify(s.s1, s.s2)) throw Error(Errc::InvalidSample, "scored sample label contradicts s1/s2");
  return s;
}

ojson to_json(const RoundState& s) {
  ojson j;
  j["round_index"] = s.round_index;
  j["generation"] = s.generation;
  j["acquisition_manifest"] = s.acquisition_manifest;
  j["positives_manifest"] = s.positives_manifest;
  j["negatives_manifest"] = s.negatives_manifest;
  j["jobspec"] = s.jobspec ? ojson(*s.jobspec) : ojson(nullptr);
  j["n_positive"] = s.n_positive;
  j["n_negative"] = s.n_negative;
  j["n_skipped"] = s.n_skipped;
  j["n_failed"] = s.n_failed;
  j["eval_score"] = s.eval_score;
  j["eval_by_target"] = s.eval_by_target;
  j["delta_vs_best"] = s.delta_vs_best;
  j["status"] = to_string(s.status);
  return j;
}

RoundState round_state_from_json(const nlohmann::json& j) {
  RoundState s;
  try {
    s.round_index = j.at("round_index").get<int>();
    s.generation = j.at("generation").get<int>();
    s.acquisition_manifest = j.at("acquisition_manifest").get<std::string>();
    s.positives_manifest = j.at("positives_manifest").get<std::string>();
    s.negatives_manifest = j.at("negatives_manifest").get<std::string>();
    if (!j.at("jobspec").is_null()) s.jobspec = j.at("jobspec").get<std::string>();
    s.n_positive = j.at("n_positive").get<std::size_t>();
    s.n_negative = j.at("n_negative").get<std::size_t>();
    s.n_skipped = j.value("n_skipped", std::size_t{0});
    s.n_failed = j.value("n_failed", std::size_t{0});
    s.eval_score = j.at("eval_score").get<double>();
    s.eval_by_target = j.value("eval_by_target", std::map<std::string, double>{});
    s.delta_vs_best = j.at("delta_vs_best").get<double>();
    s.status = round_status_from_string(j.at("status").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ResumeStateCorrupt, std::string("malformed round state: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Phases

std::size_t pick_voice(std::uint64_t seed, std::string_view sample_id, std::size_t pool_size) {
  if (pool_size == 0) throw Error(Errc::Config, "voice pool is empty");
  const std::string digest = sha256_raw(std::to_string(seed) + ":" + std::string(sample_id));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(digest[i]);
  return static_cast<std::size_t>(v % pool_size);
}

namespace {

void check_budget(std::size_t failed, std::size_t total, double budget, std::string_view phase) {
  if (total == 0) return;
  const double frac = static_cast<double>(failed) / static_cast<double>(total);
  if (frac > budget) {
    throw Error(Errc::FailureBudgetExceeded, std::string(phase) + ": " + std::to_string(failed) + " of " +
                                                 std::to_string(total) + " requests failed after retries");
  }
}

std::optional<double> target_duration(const Sample& s) {
  if (s.authentic_audio && s.authentic_audio->duration_s > 0.0) return s.authentic_audio->duration_s;
  return std::nullopt;
}

}  // namespace

AcquisitionResult run_acquisition(const std::vector<Sample>& samples, const std::vector<std::string>& voice_pool,
                                  const EvolutionConfig& config, TtsClient& tts) {
  if (voice_pool.empty()) throw Error(Errc::Config, "run_acquisition: voice pool is empty");
  std::vector<SynthesisRequest> requests;
  requests.reserve(samples.size());
  for (const auto& s : samples) {
    requests.push_back({s.text, voice_pool[pick_voice(config.seed, s.id, voice_pool.size())], target_duration(s)});
  }
  auto outcomes = batch(requests, [&](const SynthesisRequest& r) { return tts.synthesize_once(r); }, tts.endpoint());

  AcquisitionResult out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!outcomes[i].ok()) {
      ++out.n_failed;
      continue;
    }
    Sample s = samples[i];
    s.synthetic_audio = outcomes[i].value->audio;
    s.degraded = outcomes[i].value->overrun;
    out.n_degraded += s.degraded ? 1 : 0;
    out.samples.push_back(std::move(s));
  }
  check_budget(out.n_failed, samples.size(), config.failure_budget, "acquisition");
  return out;
}

namespace {

std::optional<AudioRef> choose_speech(const Sample& s, SpeechSource source) {
  const bool synth_ok = s.synthetic_audio && !s.degraded;
  if (source == SpeechSource::PreferSynthetic) {
    if (synth_ok) return s.synthetic_audio;
    if (s.authentic_audio) return s.authentic_audio;
  } else {
    if (s.authentic_audio) return s.authentic_audio;
    if (synth_ok) return s.synthetic_audio;
  }
  return std::nullopt;
}

}  // namespace

RefinementResult run_refinement(const std::vector<Sample>& manifest, const EvolutionConfig& config,
                                TranslatorClient& translator, ScorerClient& scorer) {
  RefinementResult out;
  std::vector<const Sample*> active;
  std::vector<AudioRef> speech;
  for (const auto& s : manifest) {
    if (s.degraded && config.skip_degraded) {
      out.skipped_ids.push_back(s.id);
      continue;
    }
    auto audio = choose_speech(s, config.speech_source);
    if (!audio) throw Error(Errc::MissingAudio, "sample " + s.id + " has no usable speech");
    active.push_back(&s);
    speech.push_back(std::move(*audio));
  }

  std::vector<TranslationRequest> mt;
  std::vector<TranslationRequest> smt;
  for (std::size_t i = 0; i < active.size(); ++i) {
    mt.push_back({TranslateMode::MT, active[i]->text, std::nullopt, active[i]->direction()});
    smt.push_back({TranslateMode::SMT, active[i]->text, speech[i], active[i]->direction()});
  }
  auto translate = [&](const TranslationRequest& r) { return translator.translate_once(r); };
  const auto mt_out = batch(mt, translate, translator.endpoint());
  const auto smt_out = batch(smt, translate, translator.endpoint());

  // Score both hypotheses of every sample whose translations succeeded.
  std::vector<ScoreRequest> score_reqs;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (!mt_out[i].ok() || !smt_out[i].ok()) continue;
    score_reqs.push_back({active[i]->text, mt_out[i].value->text, active[i]->reference});
    score_reqs.push_back({active[i]->text, smt_out[i].value->text, active[i]->reference});
    owner.push_back(i);
  }
  const auto scores =
      batch(score_reqs, [&](const ScoreRequest& r) { return scorer.score_once(r); }, scorer.endpoint());

  std::vector<std::optional<ScoredSample>> by_index(active.size());
  for (std::size_t k = 0; k < owner.size(); ++k) {
    const auto& o1 = scores[2 * k];
    const auto& o2 = scores[2 * k + 1];
    if (!o1.ok() || !o2.ok()) continue;
    const std::size_t i = owner[k];
    by_index[i] = ScoredSample{active[i]->id, speech[i].origin, *o1.value, *o2.value, classify(*o1.value, *o2.value)};
  }
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (by_index[i]) {
      out.scored.push_back(std::move(*by_index[i]));
    } else {
      out.failed_ids.push_back(active[i]->id);
    }
  }
  check_budget(out.failed_ids.size(), active.size(), config.failure_budget, "refinement");
  return out;
}

PartitionResult partition_and_emit(const std::vector<ScoredSample>& scored, const std::vector<Sample>& manifest,
                                   int round_index, const fs::path& workspace, const OptimizerConfig& optimizer) {
  if (scored.empty()) throw Error(Errc::EmptyInput, "partition_and_emit: no scored samples");
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : manifest) by_id.emplace(s.id, &s);

  const std::string dir = "rounds/" + std::to_string(round_index);
  PartitionResult out;
  out.positives_manifest = dir + "/positives.jsonl";
  out.negatives_manifest = dir + "/negatives.jsonl";

  std::string pos;
  std::string neg;
  for (const auto& sc : scored) {
    auto it = by_id.find(sc.sample_id);
    if (it == by_id.end()) throw Error(Errc::InvalidSample, "scored sample " + sc.sample_id + " not in manifest");
    ojson row = to_json(*it->second);
    row["s1"] = sc.s1;
    row["s2"] = sc.s2;
    const std::string line = row.dump() + "\n";
    if (sc.label == Label::Positive) {
      pos += line;
      ++out.n_positive;
    } else {
      neg += line;
      ++out.n_negative;
    }
  }
  write_text_atomic(workspace / out.positives_manifest, pos);
  write_text_atomic(workspace / out.negatives_manifest, neg);

  const fs::path jobspec_file = workspace / dir / "jobspec.json";
  if (out.n_positive == 0) {
    out.warnings.push_back("round " + std::to_string(round_index) + ": no positive samples; no training job emitted");
    std::error_code ec;
    fs::remove(jobspec_file, ec);
    return out;
  }
  out.jobspec = continual_spec(out.positives_manifest, round_index, optimizer, workspace);
  out.jobspec_path = dir + "/jobspec.json";
  write_text_atomic(jobspec_file, to_json(*out.jobspec).dump(2) + "\n");
  return out;
}

EvaluationResult run_evaluation(const std::vector<Sample>& eval_samples, const EvolutionConfig& config,
                                TtsClient& tts, TranslatorClient& translator, ScorerClient& scorer) {
  if (eval_samples.empty()) throw Error(Errc::EmptyEvalSet, "evaluation set is empty");
  if (config.fixed_eval_voice.empty()) throw Error(Errc::Config, "fixed_eval_voice is not set");

  std::vector<SynthesisRequest> synth;
  for (const auto& s : eval_samples) synth.push_back({s.text, config.fixed_eval_voice, target_duration(s)});
  const auto audio =
      batch(synth, [&](const SynthesisRequest& r) { return tts.synthesize_once(r); }, tts.endpoint());

  std::vector<std::size_t> idx;
  std::vector<TranslationRequest> smt;
  for (std::size_t i = 0; i < eval_samples.size(); ++i) {
    if (!audio[i].ok()) continue;
    idx.push_back(i);
    smt.push_back({TranslateMode::SMT, eval_samples[i].text, audio[i].value->audio, eval_samples[i].direction()});
  }
  const auto hyps =
      batch(smt, [&](const TranslationRequest& r) { return translator.translate_once(r); }, translator.endpoint());

  std::vector<std::size_t> scored_idx;
  std::vector<ScoreRequest> reqs;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!hyps[k].ok()) continue;
    const auto& s = eval_samples[idx[k]];
    scored_idx.push_back(idx[k]);
    reqs.push_back({s.text, hyps[k].value->text, s.reference});
  }
  const auto scores = batch(reqs, [&](const ScoreRequest& r) { return scorer.score_once(r); }, scorer.endpoint());

  EvaluationResult out;
  double sum = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> per_target;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!scores[k].ok()) continue;
    const double v = *scores[k].value;
    sum += v;
    ++out.n_scored;
    auto& acc = per_target[eval_samples[scored_idx[k]].tgt_lang.code()];
    acc.first += v;
    acc.second += 1;
  }
  check_budget(eval_samples.size() - out.n_scored, eval_samples.size(), config.failure_budget, "evaluation");
  if (out.n_scored == 0) throw Error(Errc::FailureBudgetExceeded, "evaluation: no sample could be scored");
  out.score = sum / static_cast<double>(out.n_scored);
  for (const auto& [tgt, acc] : per_target) out.by_target[tgt] = acc.first / static_cast<double>(acc.second);
  return out;
}

double delta_vs_best(double eval_score, double baseline, const std::vector<double>& prior_scores) {
  double best = baseline;
  for (double p : prior_scores) best = std::max(best, p);
  return eval_score - best;
}

RoundStatus check_convergence(const std::vector<RoundState>& history, const EvolutionConfig& config) {
  if (history.empty()) throw Error(Errc::EmptyInput, "check_convergence: empty history");
  const auto patience = static_cast<std::size_t>(config.patience);
  if (history.size() >= patience) {
    const bool flat = std::all_of(history.end() - static_cast<std::ptrdiff_t>(patience), history.end(),
                                  [&](const RoundState& r) { return r.delta_vs_best < config.epsilon; });
    if (flat) return RoundStatus::Converged;
  }
  if (history.back().round_index >= config.max_rounds) return RoundStatus::MaxRounds;
  return history.back().delta_vs_best >= config.epsilon ? RoundStatus::Improved : RoundStatus::Plateau;
}

// ---------------------------------------------------------------------------
// Hooks and providers

ShellUpdateHook::ShellUpdateHook(std::string command_template) : template_(std::move(command_template)) {}

std::string ShellUpdateHook::render(std::string_view command_template, const fs::path& jobspec_path) {
  std::string out(command_template);
  const std::string needle = "{jobspec}";
  const std::string value = jobspec_path.string();
  for (std::size_t pos = 0; (pos = out.find(needle, pos)) != std::string::npos; pos += value.size()) {
    out.replace(pos, needle.size(), value);
  }
  return out;
}

void ShellUpdateHook::run(const fs::path& jobspec_path, int round_index) {
  const std::string cmd = render(template_, jobspec_path);
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    const int code = rc == -1 ? -1 : (WIFEXITED(rc) ? WEXITSTATUS(rc) : 128);
    throw Error(Errc::HookFailed,
                "update hook for round " + std::to_string(round_index) + " exited with status " + std::to_string(code));
  }
}

HttpBackendProvider::HttpBackendProvider(Options opts)
    : opts_(std::move(opts)), cache_(std::make_shared<ContentCache>(opts_.workspace / "cache")) {}

BackendSet HttpBackendProvider::at_generation(int generation) {
  BackendSet set;
  set.tts = std::make_shared<TtsClient>(std::make_shared<HttpTransport>(opts_.tts), opts_.tts, cache_,
                                        opts_.tts_model, opts_.workspace);
  set.translator = std::make_shared<TranslatorClient>(std::make_shared<HttpTransport>(opts_.translate),
                                                      opts_.translate, cache_,
                                                      opts_.translator_model + "@gen" + std::to_string(generation));
  set.scorer = std::make_shared<ScorerClient>(std::make_shared<HttpTransport>(opts_.score), opts_.score, cache_,
                                              opts_.scorer_model);
  return set;
}

MockBackendProvider::MockBackendProvider(Options opts)
    : opts_(std::move(opts)), cache_(std::make_shared<ContentCache>(opts_.workspace / "cache")) {
  if (opts_.scale_schedule.empty()) opts_.scale_schedule.push_back(1.0);
}

BackendSet MockBackendProvider::at_generation(int generation) {
  const std::size_t g = std::min<std::size_t>(static_cast<std::size_t>(std::max(generation, 0)),
                                              opts_.scale_schedule.size() - 1);
  const double scale = opts_.scale_schedule[g];

  auto tts = std::make_shared<MockTts>(MockTts::Options{
      .workspace = opts_.workspace, .voices = {}, .chars_per_second = 15.0,
      .forced_duration_s = opts_.forced_tts_duration_s});
  auto translator = std::make_shared<MockTranslator>(MockTranslator::Options{
      .workspace = opts_.workspace, .lexicon = opts_.lexicon, .drop_last_token_in_mt = opts_.drop_last_token_in_mt});
  auto scorer = std::make_shared<MockScorer>(MockScorer::Options{.scale = scale, .constant = std::nullopt});
  auto transport = std::make_shared<MockTransport>(tts, translator, scorer);
  transports_.push_back(transport);

  std::string lex_bytes;
  for (const auto& [k, v] : opts_.lexicon) lex_bytes += k + '\x1f' + v + '\x1e';
  const std::string lex_tag = sha256_hex(lex_bytes).substr(0, 12);
  std::string tts_rev = "mock-tts";
  if (opts_.forced_tts_duration_s) tts_rev += "@forced=" + nlohmann::json(*opts_.forced_tts_duration_s).dump();

  BackendSet set;
  set.tts = std::make_shared<TtsClient>(transport, opts_.endpoint, cache_, tts_rev, opts_.workspace);
  set.translator = std::make_shared<TranslatorClient>(
      transport, opts_.endpoint, cache_,
      "mock-mllm@gen" + std::to_string(generation) + "/" + lex_tag + (opts_.drop_last_token_in_mt ? "/drop" : ""));
  set.scorer = std::make_shared<ScorerClient>(transport, opts_.endpoint, cache_,
                                              "mock-comet@scale=" + nlohmann::json(scale).dump());
  return set;
}

std::size_t MockBackendProvider::total_backend_requests() const {
  std::size_t n = 0;
  for (const auto& t : transports_) n += t->total_requests();
  return n;
}

std::map<std::string, std::string> MockBackendProvider::lexicon_from(const std::vector<Sample>& samples) {
  std::map<std::string, std::string> lex;
  for (const auto& s : samples) lex.emplace(MockTranslator::lexicon_key(s.tgt_lang.code(), s.text), s.reference);
  return lex;
}

// ---------------------------------------------------------------------------
// Loop with journal

struct EvolutionLoop::Journal {
  fs::path workspace;
  std::string inputs;
  // (round, phase) -> {relative file -> sha256}
  std::map<std::pair<int, std::string>, std::map<std::string, std::string>> entries;
  std::vector<std::pair<int, std::string>> order;

  fs::path path() const { return workspace / "journal.json"; }

  bool has(int round, Phase phase) const { return entries.contains({round, std::string(to_string(phase))}); }

  void load() {
    const nlohmann::json j = [&] {
      try {
        return nlohmann::json::parse(read_text(path()));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ResumeStateCorrupt, std::string("journal.json is not valid JSON: ") + e.what());
      }
    }();
    try {
      inputs = j.at("inputs").get<std::string>();
      for (const auto& e : j.at("entries")) {
        std::pair<int, std::string> key{e.at("round").get<int>(), e.at("phase").get<std::string>()};
        entries[key] = e.at("files").get<std::map<std::string, std::string>>();
        order.push_back(key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ResumeStateCorrupt, std::string("malformed journal.json: ") + e.what());
    }
  }

  void save() const {
    ojson j;
    j["inputs"] = inputs;
    j["entries"] = ojson::array();
    for (const auto& key : order) {
      ojson e;
      e["round"] = key.first;
      e["phase"] = key.second;
      e["files"] = entries.at(key);
      j["entries"].push_back(e);
    }
    write_text_atomic(path(), j.dump(2) + "\n");
  }

  std::map<std::string, std::string> hash_files(const std::vector<std::string>& files) const {
    std::map<std::string, std::string> out;
    for (const auto& f : files) out[f] = sha256_hex(read_text(workspace / f));
    return out;
  }

  /// Records a finished phase, or on replay verifies the regenerated files
  /// against what was recorded. Returns true when this was a replay.
  bool commit(int round, Phase phase, const std::vector<std::string>& files) {
    const std::pair<int, std::string> key{round, std::string(to_string(phase))};
    const auto hashes = hash_files(files);
    if (auto it = entries.find(key); it != entries.end()) {
      if (it->second != hashes) {
        throw Error(Errc::ResumeStateCorrupt, "round " + std::to_string(round) + " " + key.second +
                                                  ": regenerated outputs differ from the journal");
      }
      return true;
    }
    entries[key] = hashes;
    order.push_back(key);
    save();
    return false;
  }

  /// Checks journaled files still hash to their recorded values.
  void verify(int round, Phase phase) const {
    const auto& recorded = entries.at({round, std::string(to_string(phase))});
    for (const auto& [file, sha] : recorded) {
      std::string actual;
      try {
        actual = sha256_hex(read_text(workspace / file));
      } catch (const Error&) {
        throw Error(Errc::ResumeStateCorrupt, "journaled file '" + file + "' is missing");
      }
      if (actual != sha) throw Error(Errc::ResumeStateCorrupt, "journaled file '" + file + "' was modified");
    }
  }
};

EvolutionLoop::EvolutionLoop(fs::path workspace, EvolutionConfig config, BackendProvider& provider,
                             UpdateHook& hook, OptimizerConfig optimizer)
    : workspace_(std::move(workspace)),
      config_(std::move(config)),
      provider_(provider),
      hook_(hook),
      optimizer_(std::move(optimizer)) {
  config_.validate();
}

namespace {

ClientStats diff(const ClientStats& after, const ClientStats& before) {
  return {after.requests - before.requests, after.cache_hits - before.cache_hits,
          after.cache_misses - before.cache_misses};
}

struct StatsSnapshot {
  ClientStats tts, translator, scorer;
  static StatsSnapshot of(const BackendSet& b) { return {b.tts->stats(), b.translator->stats(), b.scorer->stats()}; }
};

ojson eval_json(const EvaluationResult& ev) {
  ojson j;
  j["eval_score"] = ev.score;
  j["eval_by_target"] = ev.by_target;
  j["n_scored"] = ev.n_scored;
  return j;
}

}  // namespace

std::vector<RoundState> EvolutionLoop::run(const std::vector<Sample>& train, const std::vector<Sample>& eval,
                                           const std::vector<std::string>& voice_pool) {
  if (voice_pool.empty()) throw Error(Errc::Config, "voice pool is empty");
  if (eval.empty()) throw Error(Errc::EmptyEvalSet, "evaluation set is empty");
  fs::create_directories(workspace_);
  reports_.clear();

  Journal journal{.workspace = workspace_, .inputs = {}, .entries = {}, .order = {}};
  {
    ojson inputs;
    inputs["train"] = sha256_hex(to_jsonl(train));
    inputs["eval"] = sha256_hex(to_jsonl(eval));
    inputs["voices"] = voice_pool;
    inputs["config"] = to_json(config_);
    JobSpec probe{.stage = Stage::ContinualSMT, .trainable = {}, .datasets = {}, .optimizer = optimizer_,
                  .adapter_meta = {}, .round_index = std::nullopt};
    inputs["optimizer"] = to_json(probe)["optimizer"];
    const std::string fingerprint = sha256_hex(inputs.dump());
    if (fs::exists(journal.path())) {
      journal.load();
      if (journal.inputs != fingerprint) {
        throw Error(Errc::ResumeStateCorrupt, "workspace journal belongs to different inputs or configuration");
      }
    } else {
      journal.inputs = fingerprint;
      journal.save();
    }
  }

  auto record = [&](int round, Phase phase, const BackendSet& b, const StatsSnapshot& before, bool replayed) {
    const auto after = StatsSnapshot::of(b);
    reports_.push_back({round, phase, replayed, diff(after.tts, before.tts),
                        diff(after.translator, before.translator), diff(after.scorer, before.scorer)});
  };
  auto maybe_interrupt = [&](int round, Phase phase) {
    if (interrupt_ && interrupt_->first == round && interrupt_->second == phase) {
      throw Error(Errc::Interrupted, "interrupted after round " + std::to_string(round) + " " +
                                         std::string(to_string(phase)));
    }
  };

  // Baseline evaluation before any update.
  if (journal.has(0, Phase::Evaluation)) {
    journal.verify(0, Phase::Evaluation);
    baseline_ = nlohmann::json::parse(read_text(workspace_ / "baseline.json")).at("eval_score").get<double>();
    reports_.push_back({0, Phase::Evaluation, true, {}, {}, {}});
  } else {
    const BackendSet b = provider_.at_generation(0);
    const auto before = StatsSnapshot::of(b);
    const EvaluationResult ev = run_evaluation(eval, config_, *b.tts, *b.translator, *b.scorer);
    ojson j = eval_json(ev);
    j["generation"] = 0;
    write_text_atomic(workspace_ / "baseline.json", j.dump(2) + "\n");
    baseline_ = ev.score;
    journal.commit(0, Phase::Evaluation, {"baseline.json"});
    record(0, Phase::Evaluation, b, before, false);
  }
  maybe_interrupt(0, Phase::Evaluation);

  std::vector<RoundState> history;
  std::vector<double> prior;
  int generation = 0;
  for (int k = 1; k <= config_.max_rounds; ++k) {
    const std::string dir = "rounds/" + std::to_string(k);
    if (journal.has(k, Phase::Evaluation)) {
      for (auto p : {Phase::Acquisition, Phase::Refinement, Phase::Partition, Phase::Update, Phase::Evaluation}) {
        if (journal.has(k, p)) journal.verify(k, p);
      }
      RoundState st = round_state_from_json(nlohmann::json::parse(read_text(workspace_ / dir / "state.json")));
      generation = st.generation;
      prior.push_back(st.eval_score);
      history.push_back(st);
      reports_.push_back({k, Phase::Evaluation, true, {}, {}, {}});
      if (st.status == RoundStatus::Converged || st.status == RoundStatus::MaxRounds) break;
      continue;
    }

    RoundState st;
    st.round_index = k;
    const BackendSet b = provider_.at_generation(generation);

    // Stage I
    auto before = StatsSnapshot::of(b);
    const AcquisitionResult acq = run_acquisition(train, voice_pool, config_, *b.tts);
    st.acquisition_manifest = dir + "/acquisition.jsonl";
    write_text_atomic(workspace_ / st.acquisition_manifest, to_jsonl(acq.samples));
    bool replayed = journal.commit(k, Phase::Acquisition, {st.acquisition_manifest});
    record(k, Phase::Acquisition, b, before, replayed);
    maybe_interrupt(k, Phase::Acquisition);

    // Stage II
    before = StatsSnapshot::of(b);
    const RefinementResult ref = run_refinement(acq.samples, config_, *b.translator, *b.scorer);
    std::string scored_bytes;
    for (const auto& s : ref.scored) scored_bytes += to_json(s).dump() + "\n";
    write_text_atomic(workspace_ / dir / "scored.jsonl", scored_bytes);
    replayed = journal.commit(k, Phase::Refinement, {dir + "/scored.jsonl"});
    record(k, Phase::Refinement, b, before, replayed);
    maybe_interrupt(k, Phase::Refinement);
    st.n_skipped = ref.skipped_ids.size();
    st.n_failed = acq.n_failed + ref.failed_ids.size();

    // Stage III
    before = StatsSnapshot::of(b);
    const PartitionResult part = partition_and_emit(ref.scored, acq.samples, k, workspace_, optimizer_);
    std::vector<std::string> files{part.positives_manifest, part.negatives_manifest};
    if (part.jobspec_path) files.push_back(*part.jobspec_path);
    replayed = journal.commit(k, Phase::Partition, files);
    record(k, Phase::Partition, b, before, replayed);
    maybe_interrupt(k, Phase::Partition);
    st.positives_manifest = part.positives_manifest;
    st.negatives_manifest = part.negatives_manifest;
    st.jobspec = part.jobspec_path;
    st.n_positive = part.n_positive;
    st.n_negative = part.n_negative;

    before = StatsSnapshot::of(b);
    replayed = journal.has(k, Phase::Update);
    if (part.jobspec_path) {
      if (!replayed) hook_.run(fs::absolute(workspace_ / *part.jobspec_path), k);
      ++generation;
    }
    journal.commit(k, Phase::Update, {});
    record(k, Phase::Update, b, before, replayed);
    maybe_interrupt(k, Phase::Update);

    // Stage IV
    const BackendSet eb = provider_.at_generation(generation);
    before = StatsSnapshot::of(eb);
    const EvaluationResult ev = run_evaluation(eval, config_, *eb.tts, *eb.translator, *eb.scorer);
    st.generation = generation;
    st.eval_score = ev.score;
    st.eval_by_target = ev.by_target;
    st.delta_vs_best = delta_vs_best(ev.score, baseline_, prior);
    history.push_back(st);
    history.back().status = check_convergence(history, config_);
    st.status = history.back().status;
    prior.push_back(ev.score);
    write_text_atomic(workspace_ / dir / "state.json", to_json(st).dump(2) + "\n");
    replayed = journal.commit(k, Phase::Evaluation, {dir + "/state.json"});
    record(k, Phase::Evaluation, eb, before, replayed);
    maybe_interrupt(k, Phase::Evaluation);

    if (st.status == RoundStatus::Converged || st.status == RoundStatus::MaxRounds) break;
  }
  return history;
}

std::vector<RoundState> run_loop(const fs::path& workspace, const std::vector<Sample>& train,
                                 const std::vector<Sample>& eval, const std::vector<std::string>& voice_pool,
                                 const EvolutionConfig& config, BackendProvider& provider, UpdateHook& hook) {
  EvolutionLoop loop(workspace, config, provider, hook);
  return loop.run(train, eval, voice_pool);
}

RoundHistory load_round_history(const fs::path& workspace) {
  RoundHistory h;
  const fs::path baseline = workspace / "baseline.json";
  if (!fs::exists(baseline)) throw Error(Errc::NoRounds, "no baseline.json in '" + workspace.string() + "'");
  try {
    const auto j = nlohmann::json::parse(read_text(baseline));
    h.baseline = j.at("eval_score").get<double>();
    h.baseline_by_target = j.value("eval_by_target", std::map<std::string, double>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ResumeStateCorrupt, std::string("malformed baseline.json: ") + e.what());
  }
  for (int k = 1;; ++k) {
    const fs::path state = workspace / "rounds" / std::to_string(k) / "state.json";
    if (!fs::exists(state)) break;
    try {
      h.rounds.push_back(round_state_from_json(nlohmann::json::parse(read_text(state))));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ResumeStateCorrupt, "malformed " + state.string() + ": " + e.what());
    }
  }
  if (h.rounds.empty()) throw Error(Errc::NoRounds, "no completed rounds in '" + workspace.string() + "'");
  return h;
}

}  // namespace evoloop
