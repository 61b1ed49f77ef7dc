#include "service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "api.hpp"
#include "venus/image.hpp"
#include "venus/text.hpp"

namespace venus::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send_json(res, status, ordered_json{{"error", message}, {"kind", kind}}.dump());
}

json parse_body(const httplib::Request& req) {
  json doc = json::parse(req.body, nullptr, false);
  if (doc.is_discarded()) throw ParseError("request body is not valid JSON", 0);
  if (!doc.is_object()) throw ValidationError("request body must be a JSON object");
  return doc;
}

const json& required(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) throw ValidationError(std::string("missing field \"") + key + "\"");
  return *it;
}

mllm::ImagePayload image_field(const json& body) {
  const auto& v = required(body, "image");
  if (!v.is_string()) throw ValidationError("field \"image\" must be a base64 string");
  std::string bytes;
  try {
    bytes = base64_decode(v.get<std::string>());
  } catch (const ParseError&) {
    throw ValidationError("field \"image\" is not valid base64");
  }
  return mllm::ImagePayload::from_bytes(std::move(bytes));
}

ordered_json warnings_json(const Warnings& w) { return ordered_json(w); }

// Wraps a handler so library errors become JSON error bodies.
template <typename F>
httplib::Server::Handler guarded(F fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status_for(e), e.kind(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

std::string failed_manifest(const std::string& id, const EditJob& job, const std::string& message) {
  ordered_json m;
  m["id"] = id;
  m["status"] = "failed";
  m["job"] = {{"mode", to_string(job.mode)}, {"params", params_to_json(job.params)}};
  m["failure"] = {{"stage", "queued"}, {"kind", "shutdown"}, {"message", message}};
  m["warnings"] = ordered_json::array();
  return m.dump(2) + "\n";
}

}  // namespace

Service::Service(CliConfig config, PipelineContext ctx)
    : config_(std::move(config)), ctx_(std::move(ctx)), server_(std::make_unique<httplib::Server>()) {
  setup_routes();
  for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  return port_;
}

void Service::run() {
  if (port_ < 0) throw ConfigError("Service::run called before bind");
  spdlog::info("serving on port {}", port_);
  server_->listen_after_bind();
}

void Service::stop() {
  std::call_once(stop_once_, [this] {
    server_->stop();
    std::deque<Pending> drained;
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      drained.swap(queue_);
      for (const auto& p : drained) live_.erase(p.id);
    }
    cv_.notify_all();
    for (const auto& p : drained) {
      try {
        ctx_.runs->publish(p.id, {{"manifest.json", failed_manifest(p.id, p.job, "service shut down before the run started")}});
      } catch (const std::exception& e) {
        spdlog::error("cannot record shutdown of run {}: {}", p.id, e.what());
      }
    }
    for (auto& t : workers_) {
      if (t.joinable()) t.join();
    }
  });
}

std::string Service::live_status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = live_.find(id);
  return it == live_.end() ? std::string() : it->second;
}

void Service::worker_loop() {
  for (;;) {
    Pending p;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      p = std::move(queue_.front());
      queue_.pop_front();
      live_[p.id] = "running";
    }
    try {
      run_edit(p.job, ctx_);
    } catch (const std::exception& e) {
      // Job-shape errors were caught at submission; anything here is a bug or
      // an unwritable runs directory.
      spdlog::error("run {} aborted: {}", p.id, e.what());
    }
    std::lock_guard lock(mutex_);
    live_.erase(p.id);
  }
}

std::string Service::submit(EditJob job) {
  ctx_.backends.get(job.params.backend);
  if (job.needs_mllm() && !ctx_.mllm) throw ConfigError("this edit needs an MLLM endpoint, none is configured");
  job.id = ctx_.runs->allocate_id();
  const auto id = job.id;
  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw ConfigError("service is shutting down");
    live_[id] = "pending";
    queue_.push_back({id, std::move(job)});
  }
  cv_.notify_one();
  return id;
}

void Service::setup_routes() {
  auto& s = *server_;

  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, ordered_json{{"status", "ok"}, {"version", kVersion}}.dump());
  });

  s.Post("/api/extract", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           if (!ctx_.mllm) return send_error(res, 503, "config", "no MLLM endpoint configured");
           Warnings w;
           const auto g = ctx_.mllm->extract_scene_graph({image_field(body)}, &w);
           ordered_json out{{"graph", graph_to_json(g)}, {"warnings", warnings_json(w)}};
           send_json(res, 200, out.dump());
         }));

  s.Post("/api/auto-edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           if (!ctx_.mllm) return send_error(res, 503, "config", "no MLLM endpoint configured");
           const auto& instr = required(body, "instruction");
           if (!instr.is_string()) throw ValidationError("field \"instruction\" must be a string");
           mllm::AutoEditRequest r{image_field(body), graph_from_value(required(body, "graph")),
                                   instr.get<std::string>()};
           Warnings w;
           const auto g = ctx_.mllm->auto_edit_graph(r, &w);
           ordered_json out{{"graph", graph_to_json(g)}, {"warnings", warnings_json(w)}};
           send_json(res, 200, out.dump());
         }));

  s.Post("/api/diff", guarded([](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           send_json(res, 200,
                     diff_bytes(graph_from_value(required(body, "source")), graph_from_value(required(body, "target"))));
         }));

  s.Post("/api/compile", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           TokenBudget budget = config_.budget;
           if (auto it = body.find("budget"); it != body.end() && it->is_object()) {
             budget.max_tokens = it->value("max_tokens", budget.max_tokens);
             budget.max_relations = it->value("max_relations", budget.max_relations);
             budget.counter = it->value("counter", budget.counter);
           }
           budget.validate();
           send_json(res, 200,
                     compile_bytes(graph_from_value(required(body, "source")),
                                   graph_from_value(required(body, "target")), budget));
         }));

  s.Post("/api/edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto id = submit(job_from_json(parse_body(req), config_.budget));
           ordered_json out{{"id", id}, {"status", "pending"}, {"href", "/api/runs/" + id}};
           send_json(res, 202, out.dump());
         }));

  s.Get("/api/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
          std::map<std::string, std::string> all;
          for (const auto& id : ctx_.runs->list()) {
            try {
              all[id] = ctx_.runs->read_manifest(id).value("status", "unknown");
            } catch (const Error&) {
              all[id] = "unknown";
            }
          }
          {
            std::lock_guard lock(mutex_);
            for (const auto& [id, st] : live_) all[id] = st;
          }
          auto runs = ordered_json::array();
          for (const auto& [id, st] : all) runs.push_back({{"id", id}, {"status", st}});
          send_json(res, 200, ordered_json{{"runs", runs}}.dump());
        }));

  s.Get(R"(/api/runs/([A-Za-z0-9._-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          if (const auto st = live_status(id); !st.empty()) {
            return send_json(res, 200, ordered_json{{"id", id}, {"status", st}}.dump());
          }
          if (!ctx_.runs->exists(id)) return send_error(res, 404, "not_found", "unknown run \"" + id + "\"");
          send_json(res, 200, ctx_.runs->read_manifest(id).dump());
        }));

  s.Get(R"(/api/runs/([A-Za-z0-9._-]+)/image/(input|output))",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          const std::string which = req.matches[2];
          const auto path = ctx_.runs->run_dir(id) / (which + ".png");
          std::error_code ec;
          if (!std::filesystem::is_regular_file(path, ec)) {
            return send_error(res, 404, "not_found", "run \"" + id + "\" has no " + which + " image");
          }
          res.set_content(read_file(path), "image/png");
        }));

  if (config_.static_dir) {
    if (!s.set_mount_point("/", config_.static_dir->string())) {
      throw ConfigError("static directory " + config_.static_dir->string() + " does not exist");
    }
  }

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) send_error(res, 404, "not_found", "no route for " + req.path);
  });
}

// ---------------------------------------------------------------------------

BackendServer::BackendServer(std::shared_ptr<const Backend> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/edit", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = serve_backend_request(*backend_, req.body);
    send_json(res, reply.status, reply.body);
  });
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) send_json(res, res.status, json{{"error", "no route for " + req.path}}.dump());
  });
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  return bound;
}

void BackendServer::run() { server_->listen_after_bind(); }

void BackendServer::stop() { server_->stop(); }

}  // namespace venus::cli
