#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sei {

struct MockResponse {
  int status = 200;
  std::string body;
  int delay_ms = 0;  // handler sleep, to make concurrency observable
};

// Chat-completions body with the given assistant content (finish_reason stop).
MockResponse chat_text_response(std::string_view content);

// In-process scripted HTTP server for deterministic gateway tests. Binds an
// ephemeral localhost port and serves POST /v1/chat/completions with the
// scripted responses in order; requests beyond the script get HTTP 500 and
// count as overflow. Every request body is logged in consumption order.
// The destructor shuts the server down.
class MockServer {
 public:
  explicit MockServer(std::vector<MockResponse> script);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string base_url() const;  // http://127.0.0.1:<port>
  int port() const;

  std::vector<std::string> request_log() const;
  int overflow_count() const;

  // High-water mark of simultaneously open handler invocations.
  int max_in_flight() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sei
