// Copyright 2026 The smarthome-qa Authors.
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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "shqa/error.hpp"

namespace shqa {

// Worth retrying: timeouts, HTTP 408/429/5xx.
class TransientError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

// Connection refused or host not found.
class UnreachableError : public TransientError {
 public:
  using TransientError::TransientError;
};

// Other 4xx responses and malformed bodies; retrying will not help.
class PermanentError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

// Chat-completion wire contract:
//   POST {base_url}/chat/completions
//   {model, messages: [{role, content}], temperature, max_tokens, seed?}
// Reply text is choices[0].message.content.
struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
};

nlohmann::ordered_json to_json(const ChatRequest& request);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Must be safe to call from several threads at once.
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  int backoff_base_ms = 500;
};

struct LlmClientConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_ref;  // name of the environment variable
  int max_concurrency = 4;
  RetryPolicy retry;
  int request_timeout_ms = 60000;

  void validate() const;
};

LlmClientConfig llm_config_from_json(const nlohmann::json& j);

struct BaseUrl {
  std::string scheme_host_port;  // "http://127.0.0.1:8080"
  std::string path_prefix;       // "/v1" or ""
};
BaseUrl parse_base_url(const std::string& url);

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmClientConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  LlmClientConfig config_;
  BaseUrl url_;
  std::string api_key_;
};

// POSTs `body` as JSON and returns the parsed reply, mapping failures onto
// the error classes above.
nlohmann::json post_json(const BaseUrl& url, const std::string& path,
                         const std::string& body, const std::string& api_key,
                         int timeout_ms);

// Retries TransientError with exponential backoff plus jitter
// (base * 2^(attempt-1) + U[0, base) ms). The last error is rethrown.
std::string complete_with_retry(ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy,
                                std::uint64_t jitter_seed);

// Runs task(i) for i in [0, n) on at most `max_workers` threads. After a task
// throws, no new tasks start; the first exception is rethrown once all
// workers have joined.
inline void run_bounded(std::size_t n, std::size_t max_workers,
                        const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  if (max_workers == 0) max_workers = 1;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
      }
    }
  };

  const std::size_t count = std::min(n, max_workers);
  std::vector<std::thread> threads;
  threads.reserve(count);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace shqa
