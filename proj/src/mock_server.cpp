#include "sei/mock_server.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

MockResponse chat_text_response(std::string_view content) {
  json body;
  body["choices"] = json::array({json{
      {"message", json{{"role", "assistant"}, {"content", std::string(content)}}},
      {"finish_reason", "stop"},
  }});
  body["usage"] = {{"prompt_tokens", 1}, {"completion_tokens", 1}};
  return MockResponse{200, body.dump(), 0};
}

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  std::mutex mutex;
  std::vector<MockResponse> script;
  std::size_t next = 0;
  std::vector<std::string> log;
  int overflow = 0;

  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
};

MockServer::MockServer(std::vector<MockResponse> script) : impl_(std::make_unique<Impl>()) {
  if (script.empty()) throw ConfigError("mock server script must be non-empty");
  impl_->script = std::move(script);

  // A wide pool so the server never masks client-side concurrency violations.
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(32); };

  impl_->server.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       Impl& s = *impl_;
                       const int now = s.in_flight.fetch_add(1) + 1;
                       int seen = s.max_in_flight.load();
                       while (now > seen && !s.max_in_flight.compare_exchange_weak(seen, now)) {
                       }

                       MockResponse scripted;
                       bool overflowed = false;
                       {
                         std::lock_guard<std::mutex> guard(s.mutex);
                         s.log.push_back(req.body);
                         if (s.next < s.script.size()) {
                           scripted = s.script[s.next++];
                         } else {
                           overflowed = true;
                           ++s.overflow;
                         }
                       }

                       if (overflowed) {
                         res.status = 500;
                         res.set_content("{\"error\":\"mock script exhausted\"}",
                                         "application/json");
                       } else {
                         if (scripted.delay_ms > 0) {
                           std::this_thread::sleep_for(std::chrono::milliseconds(scripted.delay_ms));
                         }
                         res.status = scripted.status;
                         res.set_content(scripted.body, "application/json");
                       }
                       s.in_flight.fetch_sub(1);
                     });

  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw IoError("mock server could not bind a localhost port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockServer::port() const { return impl_->port; }

std::vector<std::string> MockServer::request_log() const {
  std::lock_guard<std::mutex> guard(impl_->mutex);
  return impl_->log;
}

int MockServer::overflow_count() const {
  std::lock_guard<std::mutex> guard(impl_->mutex);
  return impl_->overflow;
}

int MockServer::max_in_flight() const { return impl_->max_in_flight.load(); }

}  // namespace sei
