#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venus/graph_edit.hpp"
#include "venus/http.hpp"
#include "venus/mllm_client.hpp"
#include "venus/prompt_compiler.hpp"
#include "venus/scene_graph.hpp"

namespace venus {

struct EditParams {
  int steps = 50;
  int skip = 25;
  double guidance_scale = 7.5;
  std::uint64_t seed = 42;
  std::string backend = "mock";

  /// Throws ValidationError unless 0 <= skip < steps and guidance_scale >= 0.
  void validate() const;
};

nlohmann::ordered_json params_to_json(const EditParams& params, bool with_backend = true);

enum class EditMode { scene_graph, text_gttp };

std::string_view to_string(EditMode mode);
/// Throws ValidationError.
EditMode parse_edit_mode(std::string_view text);

/// One edit run. The source graph is extracted from the image when absent.
/// In scene_graph mode the target comes from exactly one of target_graph,
/// ops or instruction.
struct EditJob {
  std::string id;  // allocated by the run store when empty
  std::filesystem::path image_path;
  std::optional<std::string> image_bytes;  // used instead of image_path when set
  std::optional<SceneGraph> source_graph;
  std::optional<SceneGraph> target_graph;
  std::optional<std::vector<GraphEditOp>> ops;
  std::optional<std::string> instruction;
  EditMode mode = EditMode::scene_graph;
  std::optional<std::string> gttp;
  EditParams params;
  TokenBudget budget;

  /// Structural checks only; no I/O. Throws ValidationError / ConfigError.
  void validate() const;
  bool needs_mllm() const;
};

// --- backend protocol ------------------------------------------------------

struct BackendRequest {
  std::string image_png;  // raw bytes; base64 on the wire
  std::string src_prompt;
  std::string tgt_prompt;
  std::string tgt_new;
  std::string tgt_bgd;
  EditParams params;
};

struct BackendInfo {
  std::string name;
  std::string version;
  std::string prompt_convention;  // "concat" or "split"
};

struct BackendResponse {
  std::string image_png;
  BackendInfo backend;
  std::int64_t timing_ms = 0;
};

nlohmann::ordered_json backend_request_to_json(const BackendRequest& req);
/// Strict schema check; errors name the offending field. Throws ProtocolError.
BackendRequest backend_request_from_json(const nlohmann::json& doc);
nlohmann::ordered_json backend_response_to_json(const BackendResponse& resp);
/// Throws ProtocolError naming the missing or mistyped field.
BackendResponse backend_response_from_json(const nlohmann::json& doc);

class Backend {
 public:
  virtual ~Backend() = default;
  /// Must be safe to call concurrently.
  virtual BackendResponse edit(const BackendRequest& req) const = 0;
};

/// PNG text key carrying the prompt record stamped by the mock backend.
inline constexpr std::string_view kPromptRecordKey = "venus:prompts";
inline constexpr int kMockBlock = 16;

/// Deterministic stand-in for a diffusion editor. Perturbs the top-left block
/// (up to 16x16) with bytes keyed by (tgt_new, seed) and records the prompts
/// in PNG metadata. An empty tgt_new leaves every pixel untouched.
class MockBackend final : public Backend {
 public:
  BackendResponse edit(const BackendRequest& req) const override;
};

/// Client side of the wire protocol: POST {base_url}/v1/edit.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string base_url, double timeout_s = 300.0,
                         std::shared_ptr<http::Transport> transport = nullptr);
  BackendResponse edit(const BackendRequest& req) const override;

 private:
  std::string url_;
  double timeout_s_;
  std::shared_ptr<http::Transport> transport_;
};

struct HandlerReply {
  int status = 200;
  std::string body;
};

/// Server side of the wire protocol for any Backend: validates the request,
/// runs the edit and encodes the response. Invalid requests get 400 with
/// {"error": ...} naming the field.
HandlerReply serve_backend_request(const Backend& backend, std::string_view body);

class BackendRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const Backend>()>;

  /// "mock" always; "remote" when a backend URL is given.
  static BackendRegistry with_defaults(std::optional<std::string> remote_url = std::nullopt);

  void add(std::string name, Factory factory);
  bool has(std::string_view name) const;
  std::vector<std::string> names() const;
  /// Throws ConfigError for unknown names.
  std::shared_ptr<const Backend> get(std::string_view name) const;

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

// --- runs ------------------------------------------------------------------

/// One directory per run under `root`: manifest.json, input.png, output.png.
/// Runs are assembled in a hidden staging directory and renamed into place,
/// so a visible run directory is always complete.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  /// Timestamp plus random suffix, unique within this store. Thread-safe.
  std::string allocate_id();
  /// Throws ValidationError when `id` could escape the runs directory.
  std::filesystem::path run_dir(std::string_view id) const;
  bool exists(std::string_view id) const;
  std::vector<std::string> list() const;
  nlohmann::ordered_json read_manifest(std::string_view id) const;

  /// Atomically publishes `files` (name -> bytes) as the run directory.
  void publish(std::string_view id, const std::map<std::string, std::string>& files) const;

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
  std::set<std::string> issued_;
};

struct PipelineContext {
  BackendRegistry backends = BackendRegistry::with_defaults();
  std::shared_ptr<const mllm::Client> mllm;  // needed only for extraction / instructions
  std::shared_ptr<RunStore> runs;
};

struct RunResult {
  std::string id;
  std::filesystem::path run_dir;
  nlohmann::ordered_json manifest;
  bool ok() const { return manifest.value("status", "") == "done"; }
};

/// The whole flow for one job: load image, resolve graphs, compile prompts,
/// call the backend, persist. Configuration and job-shape problems throw
/// ConfigError / ValidationError before any file is read. Failures in later
/// stages are persisted as a failure manifest and returned, not thrown.
RunResult run_edit(const EditJob& job, const PipelineContext& ctx);

/// The prompt bundle stored in a manifest, in canonical byte form.
std::string manifest_bundle_bytes(const nlohmann::ordered_json& manifest);

/// Recompiles the bundle from the manifest's stored graphs and budget and
/// compares bytes. Returns a list of problems; empty means consistent.
std::vector<std::string> verify_manifest(const nlohmann::ordered_json& manifest);

// --- wire protocol conformance -------------------------------------------

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exercises a backend server with schema, determinism and error-code
/// checks. `sample_png` is the image sent in the probe requests.
std::vector<ConformanceCheck> run_conformance(const std::string& base_url, const std::string& sample_png,
                                              std::shared_ptr<http::Transport> transport = nullptr);

}  // namespace venus
