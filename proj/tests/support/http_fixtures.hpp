#pragma once

// Loopback HTTP servers and an in-memory transport standing in for the MLLM
// endpoint and the diffusion backend.

#include <atomic>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "venus/http.hpp"

namespace venus::testing {

struct Reply {
  int status = 200;
  std::string body;
};

/// Serves POST handlers on 127.0.0.1 with an ephemeral port from a
/// background thread. Stops on destruction.
class FixtureServer {
 public:
  using Handler = std::function<Reply(const std::string& body)>;

  FixtureServer();
  ~FixtureServer();
  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  void post(const std::string& path, Handler handler);
  void start();
  std::string url() const;
  int hits() const { return hits_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

/// Chat completion envelope around `content`.
std::string chat_envelope(const std::string& content);

/// MLLM stand-in answering POST /chat/completions.
std::unique_ptr<FixtureServer> chat_server(std::function<Reply(int attempt)> respond);

enum class BackendQuirk { conformant, missing_image, resized_image, server_error, not_json };

/// Backend stand-in answering POST /v1/edit. The conformant variant wraps the
/// mock backend behind the real request handler.
std::unique_ptr<FixtureServer> backend_server(BackendQuirk quirk);

/// Returns scripted responses in order and records every request.
class ScriptedTransport final : public http::Transport {
 public:
  struct Call {
    std::string url;
    std::string body;
    http::Headers headers;
  };

  explicit ScriptedTransport(std::vector<http::Response> script) : script_(script.begin(), script.end()) {}

  http::Response post(const std::string& url, const std::string& body, const http::Headers& headers,
                      double timeout_s) override;
  http::Response get(const std::string& url, double timeout_s) override;

  std::vector<Call> calls() const;

 private:
  mutable std::mutex mutex_;
  std::deque<http::Response> script_;
  std::vector<Call> calls_;
};

}  // namespace venus::testing
