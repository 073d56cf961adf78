// Copyright 2026 The CausalSynth Authors.
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

#ifndef CAUSALSYNTH_HTTP_REALIZER_HPP_
#define CAUSALSYNTH_HTTP_REALIZER_HPP_

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>

#include <json.hpp>

#include "causalsynth/channel.hpp"
#include "causalsynth/error.hpp"
#include "causalsynth/rng.hpp"

namespace causalsynth {

inline constexpr const char* kApiKeyEnv = "CAUSALSYNTH_API_KEY";

struct HttpEndpointConfig {
  // Full URL of the chat-completion route, e.g.
  // http://localhost:8000/v1/chat/completions.
  std::string url;
  std::string model;
  double temperature = 0.7;
  double top_p = 0.95;
  int max_tokens = 1024;
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{16000};
  double backoff_multiplier = 2.0;
  // Token-bucket rate; zero disables the limiter.
  double requests_per_second = 0.0;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{120};

  void validate() const {
    if (url.empty()) throw ConfigError("endpoint url is empty");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be at least 1");
    if (requests_per_second < 0.0) throw ConfigError("requests_per_second must be >= 0");
    if (backoff_multiplier < 1.0) throw ConfigError("backoff_multiplier must be >= 1");
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class TokenBucket {
 public:
  explicit TokenBucket(double rate) : rate_(rate), tokens_(std::max(rate, 1.0)) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      const auto now = Clock::now();
      const double elapsed = std::chrono::duration<double>(now - last_).count();
      tokens_ = std::min(std::max(rate_, 1.0), tokens_ + elapsed * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double tokens_;
  Clock::time_point last_ = Clock::now();
  std::mutex mu_;
};

}  // namespace detail

// Chat-completion client. Sends the system text and the user text as two
// messages and returns choices[0].message.content. The bearer token is read
// from CAUSALSYNTH_API_KEY on every request.
class HttpRealizer final : public Realizer {
 public:
  explicit HttpRealizer(HttpEndpointConfig cfg)
      : cfg_(std::move(cfg)),
        bucket_(std::make_unique<detail::TokenBucket>(cfg_.requests_per_second)),
        in_flight_(std::make_unique<std::counting_semaphore<>>(
            static_cast<std::ptrdiff_t>(cfg_.max_in_flight))) {
    cfg_.validate();
    url_ = detail::split_url(cfg_.url);
  }

  std::string id() const override { return "http:" + cfg_.model; }

  CandidateDocument realize(const Prompt& prompt, std::size_t attempt,
                            RngStream&) const override {
    const std::string body = request_body(prompt).dump();
    auto backoff = cfg_.initial_backoff;
    for (std::size_t call = 0;; ++call) {
      try {
        return {post(body), attempt, id()};
      } catch (const RealizerError& e) {
        if (!e.retryable() || call >= cfg_.max_retries) throw;
      }
      std::this_thread::sleep_for(backoff);
      backoff = std::min(cfg_.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(
                             static_cast<double>(backoff.count()) * cfg_.backoff_multiplier)));
    }
  }

  nlohmann::json request_body(const Prompt& prompt) const {
    return {{"model", cfg_.model},
            {"messages",
             {{{"role", "system"}, {"content", prompt.system_text}},
              {{"role", "user"}, {"content", prompt.user_text()}}}},
            {"temperature", cfg_.temperature},
            {"top_p", cfg_.top_p},
            {"max_tokens", cfg_.max_tokens}};
  }

  const HttpEndpointConfig& config() const noexcept { return cfg_; }

 private:
  std::string post(const std::string& body) const {
    bucket_->acquire();
    in_flight_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{in_flight_.get()};

    httplib::Client client(url_.origin);
    const auto secs = static_cast<time_t>(cfg_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(url_.path, headers, body, "application/json");
    if (!res) {
      throw NetworkError("request to " + cfg_.url + " failed: " + httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429) throw RateLimited("endpoint rate limit (HTTP 429)");
    if (status >= 500) throw NetworkError("endpoint error (HTTP " + std::to_string(status) + ")");
    if (status < 200 || status >= 300) {
      throw MalformedResponse("unexpected HTTP status " + std::to_string(status));
    }
    return parse_content(res->body);
  }

  static std::string parse_content(const std::string& body) {
    const auto json = nlohmann::json::parse(body, nullptr, false);
    if (json.is_discarded() || !json.is_object()) {
      throw MalformedResponse("response body is not a JSON object");
    }
    const auto choices = json.find("choices");
    if (choices == json.end() || !choices->is_array() || choices->empty()) {
      throw MalformedResponse("response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
      throw MalformedResponse("response choice has no message");
    }
    const auto& content = first["message"].value("content", nlohmann::json());
    if (!content.is_string() || content.get_ref<const std::string&>().empty()) {
      throw MalformedResponse("response message has no content");
    }
    return content.get<std::string>();
  }

  HttpEndpointConfig cfg_;
  detail::SplitUrl url_;
  std::unique_ptr<detail::TokenBucket> bucket_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace causalsynth

#endif  // CAUSALSYNTH_HTTP_REALIZER_HPP_
