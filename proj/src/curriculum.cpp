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

#include "evoloop/curriculum.hpp"

#include "evoloop/error.hpp"

namespace evoloop {

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::ASR: return "ASR";
    case Stage::S2TT: return "S2TT";
    case Stage::SMT: return "SMT";
    case Stage::ContinualSMT: return "ContinualSMT";
  }
  return "?";
}

std::string_view to_string(Trainable t) noexcept {
  return t == Trainable::SpeechAdapter ? "SpeechAdapter" : "LlmAdapter";
}

Stage stage_from_string(std::string_view s) {
  for (Stage st : {Stage::ASR, Stage::S2TT, Stage::SMT, Stage::ContinualSMT}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::Config, "unknown stage '" + std::string(s) + "'");
}

Trainable trainable_from_string(std::string_view s) {
  if (s == "SpeechAdapter") return Trainable::SpeechAdapter;
  if (s == "LlmAdapter") return Trainable::LlmAdapter;
  throw Error(Errc::Config, "unknown trainable component '" + std::string(s) + "'");
}

std::set<Trainable> trainable_for(Stage stage) {
  if (stage == Stage::SMT || stage == Stage::ContinualSMT) {
    return {Trainable::SpeechAdapter, Trainable::LlmAdapter};
  }
  return {Trainable::SpeechAdapter};
}

void validate(const JobSpec& spec) {
  if (!(spec.optimizer.peak_lr > 0.0)) throw Error(Errc::Config, "optimizer.peak_lr must be > 0");
  if (spec.optimizer.warmup_steps < 0) throw Error(Errc::Config, "optimizer.warmup_steps must be >= 0");
  if (spec.optimizer.decay != "Linear") throw Error(Errc::Config, "optimizer.decay must be Linear");
  if (spec.trainable != trainable_for(spec.stage)) {
    throw Error(Errc::Config, "trainable set does not match stage " + std::string(to_string(spec.stage)));
  }
}

nlohmann::ordered_json to_json(const JobSpec& spec) {
  nlohmann::ordered_json j;
  j["stage"] = to_string(spec.stage);
  j["trainable"] = nlohmann::ordered_json::array();
  for (Trainable t : spec.trainable) j["trainable"].push_back(to_string(t));
  j["datasets"] = spec.datasets;
  j["optimizer"] = {{"family", spec.optimizer.family},
                    {"peak_lr", spec.optimizer.peak_lr},
                    {"warmup_steps", spec.optimizer.warmup_steps},
                    {"decay", spec.optimizer.decay}};
  j["adapter_meta"] = {{"queries", spec.adapter_meta.queries},
                       {"query_dim", spec.adapter_meta.query_dim},
                       {"lora_rank", spec.adapter_meta.lora_rank},
                       {"lora_alpha", spec.adapter_meta.lora_alpha}};
  if (spec.round_index) j["round_index"] = *spec.round_index;
  return j;
}

JobSpec jobspec_from_json(const nlohmann::json& j) {
  JobSpec spec;
  try {
    spec.stage = stage_from_string(j.at("stage").get<std::string>());
    for (const auto& t : j.at("trainable")) spec.trainable.insert(trainable_from_string(t.get<std::string>()));
    spec.datasets = j.at("datasets").get<std::vector<std::string>>();
    const auto& o = j.at("optimizer");
    spec.optimizer = {o.at("family").get<std::string>(), o.at("peak_lr").get<double>(),
                      o.at("warmup_steps").get<int>(), o.at("decay").get<std::string>()};
    const auto& m = j.at("adapter_meta");
    spec.adapter_meta = {m.at("queries").get<int>(), m.at("query_dim").get<int>(), m.at("lora_rank").get<int>(),
                         m.at("lora_alpha").get<int>()};
    if (auto it = j.find("round_index"); it != j.end() && !it->is_null()) spec.round_index = it->get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("malformed jobspec: ") + e.what());
  }
  validate(spec);
  return spec;
}

std::vector<JobSpec> plan_stages(const std::map<Stage, std::vector<std::string>>& bindings,
                                 const OptimizerConfig& optimizer) {
  std::vector<JobSpec> out;
  for (Stage st : {Stage::ASR, Stage::S2TT, Stage::SMT}) {
    auto it = bindings.find(st);
    if (it == bindings.end() || it->second.empty()) {
      throw Error(Errc::MissingBinding, "no dataset binding for stage " + std::string(to_string(st)));
    }
    JobSpec spec{.stage = st,
                 .trainable = trainable_for(st),
                 .datasets = it->second,
                 .optimizer = optimizer,
                 .adapter_meta = {},
                 .round_index = std::nullopt};
    validate(spec);
    out.push_back(std::move(spec));
  }
  return out;
}

JobSpec continual_spec(const std::filesystem::path& positives_manifest, int round_index,
                       const OptimizerConfig& optimizer, const std::filesystem::path& root) {
  const std::filesystem::path on_disk = root.empty() ? positives_manifest : root / positives_manifest;
  if (!std::filesystem::exists(on_disk)) {
    throw Error(Errc::MissingManifest, "positives manifest '" + positives_manifest.string() + "' does not exist");
  }
  JobSpec spec{.stage = Stage::ContinualSMT,
               .trainable = trainable_for(Stage::ContinualSMT),
               .datasets = {positives_manifest.generic_string()},
               .optimizer = optimizer,
               .adapter_meta = {},
               .round_index = round_index};
  validate(spec);
  return spec;
}

}  // namespace evoloop
