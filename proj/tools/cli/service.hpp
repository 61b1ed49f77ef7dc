#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "venus/pipeline.hpp"

namespace httplib {
class Server;
}

namespace venus::cli {

inline constexpr std::string_view kVersion = "0.3.0";

/// HTTP API over the pipeline. Edit runs go to a bounded worker pool;
/// everything else is answered inline.
class Service {
 public:
  Service(CliConfig config, PipelineContext ctx);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port. Throws IoError when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  void run();
  /// Stops accepting requests, lets in-flight runs finish and records queued
  /// runs as failed. Safe to call from any thread, more than once.
  void stop();

  /// Status of a queued or executing run, or empty when unknown here.
  std::string live_status(const std::string& id) const;

 private:
  struct Pending {
    std::string id;
    EditJob job;
  };
  void setup_routes();
  void worker_loop();
  std::string submit(EditJob job);

  CliConfig config_;
  PipelineContext ctx_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  std::map<std::string, std::string> live_;  // id -> pending | running
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::once_flag stop_once_;
};

/// Reference server for the backend wire protocol (POST /v1/edit) around any
/// Backend. Used for conformance testing and local development.
class BackendServer {
 public:
  explicit BackendServer(std::shared_ptr<const Backend> backend);
  ~BackendServer();
  int bind(const std::string& host, int port);
  void run();
  void stop();

 private:
  std::shared_ptr<const Backend> backend_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace venus::cli
