#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sei {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;

  // messages non-empty, last role user, temperature >= 0, max_tokens >= 1.
  void validate() const;
};

enum class FinishReason { kStop, kLength, kError };

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::kStop;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct GatewayConfig {
  std::string base_url = "http://127.0.0.1:8080";  // scheme://host[:port], no path
  std::string api_key;  // sent as a Bearer header, never logged
  int max_concurrent = 4;
  int max_retries = 3;
  int backoff_base_ms = 200;
  int request_timeout_ms = 30000;

  void validate() const;
};

// Client for any OpenAI-compatible chat-completions endpoint. chat_complete
// may be called from many threads; a config-scoped semaphore keeps at most
// max_concurrent HTTP requests in flight. Retries 429/5xx/transport errors
// with jittered exponential backoff (backoff_base_ms * 2^attempt); other 4xx
// fail immediately. Total attempts <= max_retries + 1.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ChatResponse chat_complete(const ChatRequest& request);

  const GatewayConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sei
