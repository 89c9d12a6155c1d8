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

#include "shqa/chat_client.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "shqa/rng.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const ChatRequest& request) {
  ordered_json j;
  j["model"] = request.model;
  ordered_json messages = ordered_json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  j["messages"] = std::move(messages);
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  if (request.seed) j["seed"] = *request.seed;
  return j;
}

void LlmClientConfig::validate() const {
  if (base_url.empty()) throw ValidationError("LLM base_url is empty");
  if (max_concurrency < 1) throw ValidationError("max_concurrency must be >= 1");
  if (retry.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  if (retry.backoff_base_ms < 0) throw ValidationError("negative backoff");
  if (request_timeout_ms < 1) throw ValidationError("timeout must be positive");
}

LlmClientConfig llm_config_from_json(const json& j) {
  LlmClientConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model_name = j.value("model_name", c.model_name);
  c.api_key_ref = j.value("api_key_ref", c.api_key_ref);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.request_timeout_ms = j.value("request_timeout_ms", c.request_timeout_ms);
  if (auto r = j.find("retry"); r != j.end()) {
    c.retry.max_attempts = r->value("max_attempts", c.retry.max_attempts);
    c.retry.backoff_base_ms = r->value("backoff_base_ms", c.retry.backoff_base_ms);
  }
  c.validate();
  return c;
}

BaseUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url '" + url + "' lacks a scheme");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("base_url '" + url + "' must use http or https");
  }
  if (scheme_end + 3 >= url.size() || url[scheme_end + 3] == '/') {
    throw ValidationError("base_url '" + url + "' lacks a host");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  BaseUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path_prefix = url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
      out.path_prefix.pop_back();
    }
  }
  return out;
}

json post_json(const BaseUrl& url, const std::string& path,
               const std::string& body, const std::string& api_key,
               int timeout_ms) {
  httplib::Client client(url.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto res = client.Post(url.path_prefix + path, headers, body,
                         "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = url.scheme_host_port + url.path_prefix + path +
                             ": " + httplib::to_string(err);
    if (err == httplib::Error::Connection) throw UnreachableError(what);
    throw TransientError(what);
  }
  const int status = res->status;
  if (status == 408 || status == 429 || status >= 500) {
    throw TransientError("HTTP " + std::to_string(status) + " from " +
                         url.scheme_host_port);
  }
  if (status < 200 || status >= 300) {
    throw PermanentError("HTTP " + std::to_string(status) + " from " +
                         url.scheme_host_port + ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw PermanentError(std::string("unparseable reply: ") + e.what());
  }
}

HttpChatClient::HttpChatClient(LlmClientConfig config)
    : config_(std::move(config)), url_(parse_base_url(config_.base_url)) {
  config_.validate();
  if (!config_.api_key_ref.empty()) {
    if (const char* key = std::getenv(config_.api_key_ref.c_str())) {
      api_key_ = key;
    }
  }
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const json reply = post_json(url_, "/chat/completions",
                               to_json(request).dump(), api_key_,
                               config_.request_timeout_ms);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw PermanentError(std::string("reply lacks choices[0].message.content: ") +
                         e.what());
  }
}

std::string complete_with_retry(ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy,
                                std::uint64_t jitter_seed) {
  SplitMix64 jitter(jitter_seed);
  for (int attempt = 1;; ++attempt) {
    try {
      return client.complete(request);
    } catch (const TransientError&) {
      if (attempt >= policy.max_attempts) throw;
      if (policy.backoff_base_ms > 0) {
        const auto base = static_cast<std::uint64_t>(policy.backoff_base_ms);
        const std::uint64_t delay = (base << (attempt - 1)) + jitter.below(base);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
    }
  }
}

}  // namespace shqa
