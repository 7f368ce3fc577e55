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

#include <fstream>
#include <sstream>

#include "evoloop/backends.hpp"
#include "evoloop/text.hpp"

namespace evoloop {

ContentCache::ContentCache(std::filesystem::path root) : root_(std::move(root)) {}

std::string ContentCache::key_for(std::string_view ns, std::string_view revision,
                                  const nlohmann::ordered_json& request) {
  nlohmann::ordered_json envelope;
  envelope["ns"] = ns;
  envelope["rev"] = revision;
  envelope["req"] = request;
  return sha256_hex(envelope.dump());
}

std::filesystem::path ContentCache::path_for(std::string_view ns, std::string_view key) const {
  return root_ / std::string(ns) / std::string(key.substr(0, 2)) / (std::string(key) + ".json");
}

std::optional<nlohmann::json> ContentCache::get(std::string_view ns, std::string_view key) const {
  std::ifstream in(path_for(ns, key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // torn or foreign file: recompute
  }
}

void ContentCache::put(std::string_view ns, std::string_view key, const nlohmann::json& value) {
  namespace fs = std::filesystem;
  const fs::path final_path = path_for(ns, key);
  std::error_code ec;
  fs::create_directories(final_path.parent_path(), ec);
  fs::path tmp = final_path;
  tmp += ".tmp." + std::to_string(tmp_counter_.fetch_add(1)) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write cache entry '" + tmp.string() + "'");
    out << value.dump();
    if (!out) throw Error(Errc::Io, "cache write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, final_path, ec);
  if (ec) throw Error(Errc::Io, "cache commit failed: " + ec.message());
}

ServiceClient::ServiceClient(std::shared_ptr<Transport> transport, EndpointConfig endpoint,
                             std::shared_ptr<ContentCache> cache, std::string revision)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      cache_(std::move(cache)),
      revision_(std::move(revision)) {
  endpoint_.validate();
}

ClientStats ServiceClient::stats() const noexcept { return {requests_.load(), hits_.load(), misses_.load()}; }

void ServiceClient::reset_stats() noexcept {
  requests_ = 0;
  hits_ = 0;
  misses_ = 0;
}

nlohmann::json ServiceClient::cached_post(std::string_view ns, std::string_view path,
                                          const nlohmann::ordered_json& request,
                                          const std::function<bool(const nlohmann::json&)>& valid) {
  std::string key;
  if (cache_) {
    key = ContentCache::key_for(ns, revision_, request);
    if (auto hit = cache_->get(ns, key); hit && (!valid || valid(*hit))) {
      ++hits_;
      return *hit;
    }
    ++misses_;
  }
  ++requests_;
  nlohmann::json response = transport_->post(path, nlohmann::json::parse(request.dump()));
  if (cache_ && (!valid || valid(response))) cache_->put(ns, key, response);
  return response;
}

}  // namespace evoloop
