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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evoloop/backends.hpp"
#include "evoloop/evolution.hpp"
#include "evoloop/metrics.hpp"
#include "json.hpp"

namespace evoloop {

struct MetricsConfig {
  Smoothing smoothing = Smoothing::Exp;
  std::optional<std::filesystem::path> piece_table_path;
  double ratio_threshold = kDefaultUnderTranslationRatio;
};

struct MockConfig {
  std::vector<double> scale_schedule{1.0};
  bool drop_last_token_in_mt = true;
  std::optional<double> forced_tts_duration_s;
};

struct RunConfig {
  std::filesystem::path workspace = ".";
  EndpointConfig tts;
  EndpointConfig translate;
  EndpointConfig score;
  EvolutionConfig evolution;
  MetricsConfig metrics;
  bool strict_manifests = false;
  std::vector<std::string> voices;
  std::string update_hook;  // shell template with {jobspec}; empty = no-op
  MockConfig mock;
};

/// Applies a JSON config object over `base`. Unknown keys raise Error(Config).
RunConfig apply_config_json(RunConfig base, const nlohmann::json& j);

/// Reads and applies a config file.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// 0 success, 1 validation or domain failure, 2 I/O or configuration failure.
int exit_code_for(const Error& e) noexcept;

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evoloop
