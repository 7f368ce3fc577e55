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

#include <cmath>
#include <cstdlib>

#include "evoloop/backends.hpp"
#include "httplib.h"

namespace evoloop {

void EndpointConfig::validate() const {
  if (!(timeout_s > 0.0)) throw Error(Errc::Config, "endpoint timeout_s must be > 0");
  if (max_attempts < 1) throw Error(Errc::Config, "endpoint max_attempts must be >= 1");
  if (backoff_base_ms < 1) throw Error(Errc::Config, "endpoint backoff_base_ms must be >= 1");
  if (max_in_flight < 1) throw Error(Errc::Config, "endpoint max_in_flight must be >= 1");
}

std::chrono::milliseconds backoff_cap(const EndpointConfig& endpoint, int attempt) {
  const int shift = std::clamp(attempt, 0, 20);
  return std::chrono::milliseconds(static_cast<long long>(endpoint.backoff_base_ms) << shift);
}

Error error_from_response(int status, std::string_view body) {
  if (status >= 500 || status == 429 || status == 408) {
    return Error(Errc::BackendUnavailable, "backend returned HTTP " + std::to_string(status));
  }
  std::string name;
  std::string detail;
  try {
    const auto j = nlohmann::json::parse(body);
    name = j.value("error", std::string());
    detail = j.value("detail", std::string());
  } catch (const nlohmann::json::exception&) {
    return Error(Errc::BackendProtocol, "HTTP " + std::to_string(status) + " with non-JSON body");
  }
  static constexpr Errc kMappable[] = {Errc::SynthesisRejected, Errc::ModeAudioMismatch, Errc::EmptyTranslation,
                                       Errc::ScoreOutOfRange,   Errc::MissingAudio,      Errc::EmptyField,
                                       Errc::BackendUnavailable};
  for (Errc c : kMappable) {
    if (errc_name(c) == name) return Error(c, detail.empty() ? name : detail);
  }
  return Error(Errc::BackendProtocol, "HTTP " + std::to_string(status) + ": " + name + ": " + detail);
}

std::pair<int, nlohmann::json> response_from_error(const Error& e) {
  const int status = e.code() == Errc::BackendUnavailable ? 503 : 400;
  return {status, nlohmann::json{{"error", errc_name(e.code())}, {"detail", e.what()}}};
}

HttpTransport::HttpTransport(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) { endpoint_.validate(); }

nlohmann::json HttpTransport::post(std::string_view path, const nlohmann::json& body) {
  httplib::Client client(endpoint_.base_url);
  const auto secs = static_cast<time_t>(std::floor(endpoint_.timeout_s));
  const auto usecs = static_cast<time_t>((endpoint_.timeout_s - std::floor(endpoint_.timeout_s)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  if (!endpoint_.bearer_token.empty()) client.set_bearer_token_auth(endpoint_.bearer_token);

  auto res = client.Post(std::string(path), body.dump(), "application/json");
  if (!res) {
    throw Error(Errc::BackendUnavailable,
                "POST " + endpoint_.base_url + std::string(path) + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) throw error_from_response(res->status, res->body);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BackendProtocol, std::string("malformed response body: ") + e.what());
  }
}

std::filesystem::path resolve_workspace(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return *explicit_path;
  if (const char* env = std::getenv(kWorkspaceEnv); env && *env) return env;
  return ".";
}

}  // namespace evoloop
