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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evoloop/backends.hpp"
#include "evoloop/corpus.hpp"
#include "evoloop/curriculum.hpp"
#include "json.hpp"

namespace evoloop {

enum class SpeechSource { PreferSynthetic, PreferAuthentic };
enum class Label { Positive, Negative };
enum class RoundStatus { Improved, Plateau, Converged, MaxRounds };
enum class Phase { Acquisition, Refinement, Partition, Update, Evaluation };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(RoundStatus status) noexcept;
std::string_view to_string(Phase phase) noexcept;
std::string_view to_string(SpeechSource source) noexcept;
RoundStatus round_status_from_string(std::string_view s);
SpeechSource speech_source_from_string(std::string_view s);

struct EvolutionConfig {
  double epsilon = 0.001;  // on the [0,1] score scale
  int patience = 1;
  int max_rounds = 5;
  std::uint64_t seed = 0;
  SpeechSource speech_source = SpeechSource::PreferSynthetic;
  std::string fixed_eval_voice;
  double failure_budget = 0.05;  // abort a phase when more than this fraction fails
  bool skip_degraded = true;

  void validate() const;
};

nlohmann::ordered_json to_json(const EvolutionConfig& cfg);

/// The only labeling rule: speech helps iff it strictly raises the score.
constexpr Label classify(double s1, double s2) noexcept { return s2 > s1 ? Label::Positive : Label::Negative; }

struct ScoredSample {
  std::string sample_id;
  AudioOrigin speech_used = AudioOrigin::Synthetic;
  double s1 = 0.0;
  double s2 = 0.0;
  Label label = Label::Negative;
};

nlohmann::ordered_json to_json(const ScoredSample& s);
ScoredSample scored_from_json(const nlohmann::json& j);

struct RoundState {
  int round_index = 1;
  int generation = 0;  // model updates applied before this round's evaluation
  std::string acquisition_manifest;
  std::string positives_manifest;
  std::string negatives_manifest;
  std::optional<std::string> jobspec;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_skipped = 0;
  std::size_t n_failed = 0;
  double eval_score = 0.0;
  std::map<std::string, double> eval_by_target;
  double delta_vs_best = 0.0;
  RoundStatus status = RoundStatus::Improved;
};

nlohmann::ordered_json to_json(const RoundState& s);
RoundState round_state_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Phases

/// Index into a voice pool of size `pool_size`: the first 8 bytes of
/// SHA-256("<seed>:<sample_id>") read big-endian, modulo the pool size.
std::size_t pick_voice(std::uint64_t seed, std::string_view sample_id, std::size_t pool_size);

struct AcquisitionResult {
  std::vector<Sample> samples;  // synthetic_audio populated; overruns degraded
  std::size_t n_degraded = 0;
  std::size_t n_failed = 0;
};

/// Stage I. Throws Error(FailureBudgetExceeded) when too many syntheses fail.
AcquisitionResult run_acquisition(const std::vector<Sample>& samples, const std::vector<std::string>& voice_pool,
                                  const EvolutionConfig& config, TtsClient& tts);

struct RefinementResult {
  std::vector<ScoredSample> scored;
  std::vector<std::string> skipped_ids;  // degraded
  std::vector<std::string> failed_ids;
};

/// Stage II: s1 from MT mode, s2 from SMT mode with the chosen speech.
RefinementResult run_refinement(const std::vector<Sample>& manifest, const EvolutionConfig& config,
                                TranslatorClient& translator, ScorerClient& scorer);

struct PartitionResult {
  std::string positives_manifest;  // workspace-relative
  std::string negatives_manifest;
  std::optional<JobSpec> jobspec;  // absent when there are no positives
  std::optional<std::string> jobspec_path;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::vector<std::string> warnings;
};

/// Stage III bookkeeping: writes rounds/<k>/{positives,negatives}.jsonl and
/// rounds/<k>/jobspec.json (only when positives exist).
PartitionResult partition_and_emit(const std::vector<ScoredSample>& scored, const std::vector<Sample>& manifest,
                                   int round_index, const std::filesystem::path& workspace,
                                   const OptimizerConfig& optimizer = {});

struct EvaluationResult {
  double score = 0.0;
  std::map<std::string, double> by_target;
  std::size_t n_scored = 0;
};

/// Stage IV: fixed-voice synthesis, SMT translation, mean score.
EvaluationResult run_evaluation(const std::vector<Sample>& eval_samples, const EvolutionConfig& config,
                                TtsClient& tts, TranslatorClient& translator, ScorerClient& scorer);

/// eval_score minus the best of the baseline and every earlier round.
double delta_vs_best(double eval_score, double baseline, const std::vector<double>& prior_scores);

RoundStatus check_convergence(const std::vector<RoundState>& history, const EvolutionConfig& config);

// ---------------------------------------------------------------------------
// Loop

struct BackendSet {
  std::shared_ptr<TtsClient> tts;
  std::shared_ptr<TranslatorClient> translator;
  std::shared_ptr<ScorerClient> scorer;
};

/// Supplies clients for the model after `generation` completed updates.
class BackendProvider {
 public:
  virtual ~BackendProvider() = default;
  virtual BackendSet at_generation(int generation) = 0;
};

/// Hands a JobSpec to external training.
class UpdateHook {
 public:
  virtual ~UpdateHook() = default;
  virtual void run(const std::filesystem::path& jobspec_path, int round_index) = 0;
};

class NoopUpdateHook final : public UpdateHook {
 public:
  void run(const std::filesystem::path&, int) override {}
};

/// Runs a shell command with every "{jobspec}" replaced by the path.
/// Non-zero exit raises Error(HookFailed).
class ShellUpdateHook final : public UpdateHook {
 public:
  explicit ShellUpdateHook(std::string command_template);
  void run(const std::filesystem::path& jobspec_path, int round_index) override;
  static std::string render(std::string_view command_template, const std::filesystem::path& jobspec_path);

 private:
  std::string template_;
};

/// HTTP clients for the three services. The translator revision advances
/// with the generation so an updated model never reads stale cache entries.
class HttpBackendProvider final : public BackendProvider {
 public:
  struct Options {
    std::filesystem::path workspace;
    EndpointConfig tts;
    EndpointConfig translate;
    EndpointConfig score;
    std::string tts_model = "tts";
    std::string translator_model = "mllm";
    std::string scorer_model = "comet";
  };
  explicit HttpBackendProvider(Options opts);
  BackendSet at_generation(int generation) override;

 private:
  Options opts_;
  std::shared_ptr<ContentCache> cache_;
};

/// In-process mocks. Generation g uses scorer scale
/// scale_schedule[min(g, size-1)], so a schedule describes per-round gains.
class MockBackendProvider final : public BackendProvider {
 public:
  struct Options {
    std::filesystem::path workspace;
    std::map<std::string, std::string> lexicon;
    bool drop_last_token_in_mt = true;
    std::vector<double> scale_schedule{1.0};
    std::optional<double> forced_tts_duration_s;
    EndpointConfig endpoint{.base_url = "mock://",
                            .timeout_s = 5.0,
                            .max_attempts = 3,
                            .backoff_base_ms = 1,
                            .max_in_flight = 4,
                            .bearer_token = {}};
  };
  explicit MockBackendProvider(Options opts);
  BackendSet at_generation(int generation) override;

  /// Every transport handed out so far; their counters sum to all backend I/O.
  std::size_t total_backend_requests() const;

  /// Lexicon mapping each sample (keyed per target language) to its reference.
  static std::map<std::string, std::string> lexicon_from(const std::vector<Sample>& samples);

 private:
  Options opts_;
  std::shared_ptr<ContentCache> cache_;
  std::vector<std::shared_ptr<MockTransport>> transports_;
};

struct PhaseReport {
  int round_index = 0;  // 0 for the baseline evaluation
  Phase phase = Phase::Acquisition;
  bool replayed = false;  // resumed: outputs verified against the journal
  ClientStats tts;
  ClientStats translator;
  ClientStats scorer;

  std::size_t requests() const noexcept { return tts.requests + translator.requests + scorer.requests; }
  std::size_t cache_hits() const noexcept { return tts.cache_hits + translator.cache_hits + scorer.cache_hits; }
  std::size_t lookups() const noexcept {
    return cache_hits() + tts.cache_misses + translator.cache_misses + scorer.cache_misses;
  }
};

/// Drives acquisition -> refinement -> partition -> update -> evaluation per
/// round, journaling after every phase under <workspace>/rounds/<k>/ and
/// <workspace>/journal.json. A rerun over the same workspace resumes: phases
/// already journaled are replayed through the cache and byte-checked
/// against their recorded SHA-256, and completed rounds are reloaded.
class EvolutionLoop {
 public:
  EvolutionLoop(std::filesystem::path workspace, EvolutionConfig config, BackendProvider& provider,
                UpdateHook& hook, OptimizerConfig optimizer = {});

  std::vector<RoundState> run(const std::vector<Sample>& train, const std::vector<Sample>& eval,
                              const std::vector<std::string>& voice_pool);

  /// Stops with Error(Interrupted) right after the given phase is journaled.
  void interrupt_after(int round_index, Phase phase) { interrupt_ = std::make_pair(round_index, phase); }

  const std::vector<PhaseReport>& phase_reports() const noexcept { return reports_; }
  double baseline_score() const noexcept { return baseline_; }

 private:
  struct Journal;

  std::filesystem::path workspace_;
  EvolutionConfig config_;
  BackendProvider& provider_;
  UpdateHook& hook_;
  OptimizerConfig optimizer_;
  std::optional<std::pair<int, Phase>> interrupt_;
  std::vector<PhaseReport> reports_;
  double baseline_ = 0.0;
};

std::vector<RoundState> run_loop(const std::filesystem::path& workspace, const std::vector<Sample>& train,
                                 const std::vector<Sample>& eval, const std::vector<std::string>& voice_pool,
                                 const EvolutionConfig& config, BackendProvider& provider, UpdateHook& hook);

/// Loads baseline.json and every rounds/<k>/state.json in round order.
struct RoundHistory {
  double baseline = 0.0;
  std::map<std::string, double> baseline_by_target;
  std::vector<RoundState> rounds;
};
RoundHistory load_round_history(const std::filesystem::path& workspace);

}  // namespace evoloop
