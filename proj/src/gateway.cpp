#include "sei/gateway.hpp"

#include <chrono>
#include <mutex>
#include <random>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw ConfigError("chat request has no messages");
  if (messages.back().role != Role::kUser) {
    throw ConfigError("last chat message must have role 'user'");
  }
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

void GatewayConfig::validate() const {
  if (base_url.empty()) throw ConfigError("gateway base_url is empty");
  if (max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (backoff_base_ms < 1) throw ConfigError("backoff_base_ms must be positive");
  if (request_timeout_ms < 1) throw ConfigError("request_timeout_ms must be positive");
}

namespace {

json request_to_json(const ChatRequest& request) {
  json body;
  body["model"] = request.model;
  json msgs = json::array();
  for (const auto& m : request.messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatResponse parse_response(const std::string& body, int attempts) {
  json payload;
  try {
    payload = json::parse(body);
  } catch (const json::exception& e) {
    throw GatewayError(std::string("malformed response body: ") + e.what(), 200, attempts);
  }
  try {
    const json& choice = payload.at("choices").at(0);
    ChatResponse resp;
    const std::string reason = choice.value("finish_reason", "stop");
    if (reason == "stop") {
      resp.finish_reason = FinishReason::kStop;
    } else if (reason == "length") {
      resp.finish_reason = FinishReason::kLength;
    } else {
      resp.finish_reason = FinishReason::kError;
    }
    const json& message = choice.at("message");
    if (message.contains("content") && message.at("content").is_string()) {
      resp.content = message.at("content").get<std::string>();
    } else if (resp.finish_reason == FinishReason::kStop) {
      throw GatewayError("response finished with 'stop' but carries no content", 200, attempts);
    }
    if (payload.contains("usage")) {
      resp.prompt_tokens = payload.at("usage").value("prompt_tokens", 0);
      resp.completion_tokens = payload.at("usage").value("completion_tokens", 0);
    }
    return resp;
  } catch (const json::exception& e) {
    throw GatewayError(std::string("malformed response body: ") + e.what(), 200, attempts);
  }
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

// Equal jitter: half the exponential delay fixed, half uniform.
int jittered_delay_ms(int base_ms, int attempt) {
  thread_local std::mt19937_64 rng(std::random_device{}());
  const double full = static_cast<double>(base_ms) * std::pow(2.0, attempt);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return static_cast<int>(full / 2.0 + u * full / 2.0);
}

}  // namespace

struct Gateway::Impl {
  explicit Impl(GatewayConfig cfg)
      : config(std::move(cfg)), semaphore(config.max_concurrent) {}

  GatewayConfig config;
  std::counting_semaphore<1 << 20> semaphore;
};

Gateway::Gateway(GatewayConfig config) : impl_(nullptr) {
  config.validate();
  impl_ = std::make_unique<Impl>(std::move(config));
}

Gateway::~Gateway() = default;

const GatewayConfig& Gateway::config() const { return impl_->config; }

ChatResponse Gateway::chat_complete(const ChatRequest& request) {
  request.validate();
  const GatewayConfig& cfg = impl_->config;
  const std::string body = request_to_json(request).dump();

  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  int last_status = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    const int attempts_so_far = attempt + 1;

    httplib::Result result = [&] {
      impl_->semaphore.acquire();
      struct Release {
        std::counting_semaphore<1 << 20>* s;
        ~Release() { s->release(); }
      } release{&impl_->semaphore};

      httplib::Client client(cfg.base_url);
      client.set_connection_timeout(0, cfg.request_timeout_ms * 1000LL);
      client.set_read_timeout(0, cfg.request_timeout_ms * 1000LL);
      client.set_write_timeout(0, cfg.request_timeout_ms * 1000LL);
      return client.Post("/v1/chat/completions", headers, body, "application/json");
    }();

    if (result) {
      last_status = result->status;
      if (result->status == 200) return parse_response(result->body, attempts_so_far);
      if (!retryable_status(result->status)) {
        throw GatewayError("gateway returned non-retryable HTTP " + std::to_string(result->status),
                           result->status, attempts_so_far);
      }
    } else {
      last_status = 0;  // transport error, retryable
    }

    if (attempt == cfg.max_retries) break;
    std::this_thread::sleep_for(
        std::chrono::milliseconds(jittered_delay_ms(cfg.backoff_base_ms, attempt)));
  }

  throw GatewayError("gateway retries exhausted after " + std::to_string(cfg.max_retries + 1) +
                         " attempts (last status " + std::to_string(last_status) + ")",
                     last_status, cfg.max_retries + 1);
}

}  // namespace sei
