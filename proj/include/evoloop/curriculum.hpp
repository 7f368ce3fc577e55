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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace evoloop {

enum class Stage { ASR, S2TT, SMT, ContinualSMT };
enum class Trainable { SpeechAdapter, LlmAdapter };

std::string_view to_string(Stage stage) noexcept;
std::string_view to_string(Trainable t) noexcept;
Stage stage_from_string(std::string_view s);
Trainable trainable_from_string(std::string_view s);

struct OptimizerConfig {
  std::string family = "adamw-style";
  double peak_lr = 1e-4;
  int warmup_steps = 1000;
  std::string decay = "Linear";

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Q-Former and LoRA constants of the speech-guided MLLM.
struct AdapterMeta {
  int queries = 80;
  int query_dim = 768;
  int lora_rank = 16;
  int lora_alpha = 32;

  friend bool operator==(const AdapterMeta&, const AdapterMeta&) = default;
};

struct JobSpec {
  Stage stage = Stage::ASR;
  std::set<Trainable> trainable;
  std::vector<std::string> datasets;
  OptimizerConfig optimizer;
  AdapterMeta adapter_meta;
  std::optional<int> round_index;

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

/// The speech adapter trains in every stage; the LLM LoRA adapter only in
/// speech-guided MT stages.
std::set<Trainable> trainable_for(Stage stage);

/// Checks optimizer ranges and the trainable rule; throws Error(Config).
void validate(const JobSpec& spec);

nlohmann::ordered_json to_json(const JobSpec& spec);
JobSpec jobspec_from_json(const nlohmann::json& j);

/// Emits [ASR, S2TT, SMT]. Throws Error(MissingBinding) when a stage has no
/// dataset paths.
std::vector<JobSpec> plan_stages(const std::map<Stage, std::vector<std::string>>& bindings,
                                 const OptimizerConfig& optimizer = {});

/// Continual-training spec over one round's positives. The dataset path is
/// stored as given; existence is checked relative to `root` when set.
/// Throws Error(MissingManifest) when the file does not exist.
JobSpec continual_spec(const std::filesystem::path& positives_manifest, int round_index,
                       const OptimizerConfig& optimizer = {}, const std::filesystem::path& root = {});

}  // namespace evoloop
