// Copyright 2026 The OHD Toolkit Authors.
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

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ohd/countergen.hpp"
#include "ohd/errors.hpp"

namespace ohd {

namespace {

struct ParsedEndpoint {
  std::string host;  // scheme://host[:port]
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("llm endpoint must be a URL: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

// POSTs {"model","prompt"} and expects {"text": "..."} back. Transient
// failures (connection errors, 429, 5xx) retry with exponential backoff.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(const LlmConfig& config)
      : config_(config), endpoint_(parse_endpoint(config.endpoint)) {
    if (const char* key = std::getenv("OHD_LLM_API_KEY")) api_key_ = key;
  }

  std::string send(const std::string& prompt) override {
    nlohmann::json body;
    body["model"] = config_.model_id;
    body["prompt"] = prompt;
    const std::string payload = body.dump();

    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(100LL << (attempt - 1)));
      }
      std::lock_guard<std::mutex> lock(mutex_);
      httplib::Client client(endpoint_.host);
      client.set_read_timeout(static_cast<int>(config_.timeout_s), 0);
      client.set_connection_timeout(static_cast<int>(config_.timeout_s), 0);
      httplib::Headers headers;
      if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
      }
      auto res = client.Post(endpoint_.path, headers, payload,
                             "application/json");
      if (!res) {
        last_error = "connection failure";
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw GenerationError("llm endpoint returned status " +
                              std::to_string(res->status));
      }
      try {
        const auto parsed = nlohmann::json::parse(res->body);
        return parsed.at("text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw GenerationError(std::string("malformed llm response: ") +
                              e.what());
      }
    }
    throw GenerationError("llm request failed after " +
                          std::to_string(config_.max_retries + 1) +
                          " attempts: " + last_error);
  }

  const std::string& model_id() const override { return config_.model_id; }

 private:
  LlmConfig config_;
  ParsedEndpoint endpoint_;
  std::string api_key_;
  std::mutex mutex_;
};

}  // namespace

std::unique_ptr<LlmClient> make_http_llm_client(const LlmConfig& config) {
  return std::make_unique<HttpLlmClient>(config);
}

}  // namespace ohd
