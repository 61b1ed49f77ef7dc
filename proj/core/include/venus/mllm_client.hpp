#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "venus/http.hpp"
#include "venus/scene_graph.hpp"

namespace venus::mllm {

inline constexpr std::string_view kExtractTemplateId = "extract.v1";
inline constexpr std::string_view kEditTemplateId = "edit.v1";
inline constexpr double kAlignmentThreshold = 0.5;

struct EndpointConfig {
  std::string base_url;
  std::string api_key;
  std::string model_name;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_relations = 15;
  /// Delay before the first retry; doubles on each further retry.
  double backoff_s = 0.5;
  /// Fixture mode: responses come from this directory instead of the network.
  std::optional<std::filesystem::path> fixtures_dir;

  /// Throws ConfigError. base_url may only be empty in fixture mode.
  void validate() const;
  bool fixture_mode() const { return fixtures_dir.has_value(); }
};

/// Reads VENUS_MLLM_BASE_URL, VENUS_MLLM_API_KEY, VENUS_MLLM_MODEL and
/// VENUS_MLLM_FIXTURES over `base`.
EndpointConfig apply_env(EndpointConfig base);

/// Encoded image plus its media type ("png" or "jpeg").
struct ImagePayload {
  std::string bytes;
  std::string media_type;

  /// Sniffs the media type from magic bytes; throws ValidationError when the
  /// bytes are neither PNG nor JPEG.
  static ImagePayload from_bytes(std::string bytes);
  void validate() const;
  std::string data_uri() const;
};

struct ExtractionRequest {
  ImagePayload image;
  std::string system_template_id = std::string(kExtractTemplateId);
};

struct AutoEditRequest {
  ImagePayload image;
  SceneGraph graph;
  std::string instruction;
  std::string system_template_id = std::string(kEditTemplateId);
};

/// Text of a versioned template. Throws ConfigError for unknown ids.
std::string_view system_template(std::string_view id);
std::string_view reprompt_text();

/// Stable fixture lookup key: lowercase hex SHA-256 over the logical request
/// (template id, image bytes, graph, instruction, reprompt flag). The network
/// form of the request does not participate, so fixtures survive changes to
/// model name or endpoint.
std::string fixture_key(const ExtractionRequest& req, bool reprompt = false);
std::string fixture_key(const AutoEditRequest& req, bool reprompt = false);

using SleepFn = std::function<void(std::chrono::duration<double>)>;

/// Chat-completion client for scene graph extraction and automated editing.
/// Stateless between calls and safe to share across threads.
class Client {
 public:
  /// `config` is validated here. Null transport selects the httplib client;
  /// null `sleep` selects std::this_thread::sleep_for.
  explicit Client(EndpointConfig config, std::shared_ptr<http::Transport> transport = nullptr,
                  SleepFn sleep = nullptr);

  const EndpointConfig& config() const { return config_; }

  /// Throws EndpointError, ExtractionError, ValidationError.
  SceneGraph extract_scene_graph(const ExtractionRequest& req, Warnings* warnings = nullptr) const;
  SceneGraph auto_edit_graph(const AutoEditRequest& req, Warnings* warnings = nullptr) const;

 private:
  struct Conversation;
  SceneGraph run(const Conversation& conv, Warnings* warnings) const;
  std::string complete(const Conversation& conv, bool reprompt, const std::string& previous) const;
  std::string chat(const std::string& body) const;

  EndpointConfig config_;
  std::shared_ptr<http::Transport> transport_;
  SleepFn sleep_;
};

/// Keeps the first `max_relations` relations and the nodes they touch plus any
/// node that was already an orphan.
SceneGraph truncate_relations(const SceneGraph& graph, std::size_t max_relations);

/// |G ∩ G'| / |G| under CanonicalKey; 1.0 for an empty G.
double alignment_ratio(const SceneGraph& before, const SceneGraph& after);

}  // namespace venus::mllm
