#include "venus/mllm_client.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "venus/error.hpp"
#include "venus/image.hpp"
#include "venus/text.hpp"

namespace venus::mllm {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kExtractTemplate = R"(You convert images into scene graphs.
Return one JSON object and nothing else: no prose, no markdown fences.
Schema:
{"objects": [{"id": "o1", "name": "<noun>", "attributes": ["<adjective>", ...]}],
 "relations": [{"subject_id": "<object id>", "predicate": "<verb or preposition phrase>", "object_id": "<object id>"}]}
Rules:
- One object per distinct visible entity, including background regions such as sky, field, water, road.
- "name" is a short lowercase noun; "attributes" are short lowercase modifiers (color, size, material, state).
- Every relation links two different objects by id.
- List the most salient relations first; at most 15 relations.)";

constexpr std::string_view kEditTemplate = R"(You edit scene graphs.
You receive an image, its current scene graph as JSON, and an editing instruction.
Return the FULL edited scene graph as one JSON object and nothing else: no prose, no markdown fences.
Use the same schema as the input graph.
Rules:
- Change only what the instruction asks for.
- Keep every unaffected object with exactly the same id, name and attributes as in the input.
- Keep every unaffected relation with exactly the same predicate.
- When an object is removed, remove every relation that mentions it.
- Every relation links two different objects by id.)";

constexpr std::string_view kReprompt =
    "Your previous reply could not be parsed. Respond with JSON only: a single scene graph object, no other text.";

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

bool retryable(int status) {
  return status == 0 || status == 408 || status == 409 || status == 429 || status >= 500;
}

std::string excerpt(std::string_view s, std::size_t limit = 200) {
  if (s.size() <= limit) return std::string(s);
  return std::string(s.substr(0, limit)) + "...";
}

// Image data URIs dominate request bodies; keep logs readable.
std::string redact_body(const ordered_json& body) {
  ordered_json copy = body;
  for (auto& m : copy["messages"]) {
    if (!m["content"].is_array()) continue;
    for (auto& part : m["content"]) {
      if (part.value("type", "") == "image_url") part["image_url"]["url"] = "<image data elided>";
    }
  }
  return copy.dump();
}

std::string content_text(const json& content) {
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string()) {
        out += part["text"].get<std::string>();
      }
    }
    return out;
  }
  throw EndpointError("chat completion content is neither a string nor a list of parts", 200);
}

std::string hash_request(ordered_json doc) { return sha256_hex(doc.dump()); }

}  // namespace

void EndpointConfig::validate() const {
  if (base_url.empty() && !fixture_mode()) {
    throw ConfigError("MLLM endpoint not configured: set VENUS_MLLM_BASE_URL or VENUS_MLLM_FIXTURES");
  }
  if (!base_url.empty()) http::parse_url(base_url);
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_relations < 1) throw ConfigError("max_relations must be >= 1");
  if (!(timeout_s > 0)) throw ConfigError("timeout must be positive");
  if (backoff_s < 0) throw ConfigError("backoff must be non-negative");
}

EndpointConfig apply_env(EndpointConfig base) {
  if (const char* v = env("VENUS_MLLM_BASE_URL")) base.base_url = v;
  if (const char* v = env("VENUS_MLLM_API_KEY")) base.api_key = v;
  if (const char* v = env("VENUS_MLLM_MODEL")) base.model_name = v;
  if (const char* v = env("VENUS_MLLM_FIXTURES")) base.fixtures_dir = std::filesystem::path(v);
  return base;
}

ImagePayload ImagePayload::from_bytes(std::string bytes) {
  ImagePayload p{std::move(bytes), {}};
  if (looks_like_png(p.bytes)) {
    p.media_type = "png";
  } else if (looks_like_jpeg(p.bytes)) {
    p.media_type = "jpeg";
  } else {
    throw ValidationError("image is neither PNG nor JPEG");
  }
  return p;
}

void ImagePayload::validate() const {
  if (bytes.empty()) throw ValidationError("image is empty");
  if (media_type != "png" && media_type != "jpeg") {
    throw ValidationError("unsupported image media type \"" + media_type + "\"");
  }
}

std::string ImagePayload::data_uri() const { return "data:image/" + media_type + ";base64," + base64_encode(bytes); }

std::string_view system_template(std::string_view id) {
  if (id == kExtractTemplateId) return kExtractTemplate;
  if (id == kEditTemplateId) return kEditTemplate;
  throw ConfigError("unknown prompt template \"" + std::string(id) + "\"");
}

std::string_view reprompt_text() { return kReprompt; }

std::string fixture_key(const ExtractionRequest& req, bool reprompt) {
  ordered_json doc;
  doc["kind"] = "extract";
  doc["template"] = req.system_template_id;
  doc["image_sha256"] = sha256_hex(req.image.bytes);
  doc["reprompt"] = reprompt;
  return hash_request(std::move(doc));
}

std::string fixture_key(const AutoEditRequest& req, bool reprompt) {
  ordered_json doc;
  doc["kind"] = "auto_edit";
  doc["template"] = req.system_template_id;
  doc["image_sha256"] = sha256_hex(req.image.bytes);
  doc["graph"] = serialize_graph(req.graph, GraphFormat::json);
  doc["instruction"] = canonicalize_text(req.instruction);
  doc["reprompt"] = reprompt;
  return hash_request(std::move(doc));
}

SceneGraph truncate_relations(const SceneGraph& graph, std::size_t max_relations) {
  if (graph.size() <= max_relations) return graph;
  std::set<std::string> used_before;
  for (const auto& r : graph.relations()) {
    used_before.insert(r.subject_id);
    used_before.insert(r.object_id);
  }
  std::vector<RelationTriplet> kept(graph.relations().begin(), graph.relations().begin() + max_relations);
  std::set<std::string> used_after;
  for (const auto& r : kept) {
    used_after.insert(r.subject_id);
    used_after.insert(r.object_id);
  }
  std::vector<ObjectNode> nodes;
  for (const auto& n : graph.objects()) {
    if (used_after.contains(n.id) || !used_before.contains(n.id)) nodes.push_back(n);
  }
  return SceneGraph::create(std::move(nodes), std::move(kept));
}

double alignment_ratio(const SceneGraph& before, const SceneGraph& after) {
  if (before.empty()) return 1.0;
  std::size_t shared = 0;
  for (const auto& k : before.keys()) shared += after.contains(k) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(before.size());
}

// ---------------------------------------------------------------------------

struct Client::Conversation {
  std::string kind;
  std::string template_id;
  std::string user_text;
  const ImagePayload* image;
  std::string key;
  std::string reprompt_key;
};

Client::Client(EndpointConfig config, std::shared_ptr<http::Transport> transport, SleepFn sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  config_.validate();
  if (!transport_ && !config_.fixture_mode()) transport_ = http::default_transport();
  if (!sleep_) sleep_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

std::string Client::chat(const std::string& body) const {
  http::Headers headers{{"Content-Type", "application/json"}};
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  const auto base = http::parse_url(config_.base_url);
  const std::string url = base.origin + base.path + "/chat/completions";

  http::Response last;
  const int attempts = config_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_s * static_cast<double>(1ULL << std::min(attempt - 1, 20));
      spdlog::debug("mllm retry {}/{} in {:.2f}s", attempt, config_.max_retries, delay);
      sleep_(std::chrono::duration<double>(delay));
    }
    last = transport_->post(url, body, headers, config_.timeout_s);
    spdlog::debug("mllm response status {} ({} bytes)", last.status, last.body.size());
    if (last.status == 200) return last.body;
    if (!retryable(last.status)) {
      throw EndpointError("MLLM endpoint returned HTTP " + std::to_string(last.status) + ": " + excerpt(last.body),
                          last.status);
    }
  }
  const std::string why =
      last.status == 0 ? last.error : "HTTP " + std::to_string(last.status) + ": " + excerpt(last.body);
  throw EndpointError("MLLM endpoint failed after " + std::to_string(attempts) + " attempts: " + why, last.status);
}

std::string Client::complete(const Conversation& conv, bool reprompt, const std::string& previous) const {
  if (config_.fixture_mode()) {
    const auto& key = reprompt ? conv.reprompt_key : conv.key;
    const auto& dir = *config_.fixtures_dir;
    for (const char* ext : {".txt", ".json"}) {
      const auto p = dir / (key + ext);
      if (std::filesystem::exists(p)) return read_file(p);
    }
    const auto index = dir / "index.json";
    if (std::filesystem::exists(index)) {
      const json doc = json::parse(read_file(index), nullptr, false);
      if (doc.is_object() && doc.contains(key) && doc[key].is_string()) {
        return read_file(dir / doc[key].get<std::string>());
      }
    }
    throw EndpointError("no fixture for " + conv.kind + " request " + key + " in " + dir.string());
  }

  ordered_json user_parts = ordered_json::array();
  user_parts.push_back({{"type", "text"}, {"text", conv.user_text}});
  user_parts.push_back({{"type", "image_url"}, {"image_url", {{"url", conv.image->data_uri()}}}});
  ordered_json messages = ordered_json::array();
  messages.push_back({{"role", "system"}, {"content", std::string(system_template(conv.template_id))}});
  messages.push_back({{"role", "user"}, {"content", std::move(user_parts)}});
  if (reprompt) {
    messages.push_back({{"role", "assistant"}, {"content", previous}});
    messages.push_back({{"role", "user"}, {"content", std::string(kReprompt)}});
  }
  ordered_json body;
  body["model"] = config_.model_name;
  body["temperature"] = 0;
  body["messages"] = std::move(messages);
  spdlog::debug("mllm request to {} (Authorization: {}) {}", config_.base_url,
                config_.api_key.empty() ? "none" : "Bearer <redacted>", redact_body(body));

  const std::string raw = chat(body.dump());
  const json doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty() || !doc["choices"][0].contains("message") ||
      !doc["choices"][0]["message"].contains("content")) {
    throw EndpointError("malformed chat completion response: " + excerpt(raw), 200);
  }
  return content_text(doc["choices"][0]["message"]["content"]);
}

SceneGraph Client::run(const Conversation& conv, Warnings* warnings) const {
  auto parse = [&](const std::string& text) -> std::optional<SceneGraph> {
    Warnings local;
    try {
      auto g = extract_graph_from_model_text(text, &local);
      if (warnings) warnings->insert(warnings->end(), local.begin(), local.end());
      return g;
    } catch (const ExtractionError&) {
    } catch (const ParseError&) {
    } catch (const ValidationError&) {
    }
    return std::nullopt;
  };

  const std::string first = complete(conv, false, {});
  auto graph = parse(first);
  if (!graph) {
    spdlog::info("mllm {} reply unparseable; reprompting", conv.kind);
    const std::string second = complete(conv, true, first);
    graph = parse(second);
    if (!graph) throw ExtractionError("model reply contains no valid scene graph after one reprompt", second);
  }
  if (graph->size() > config_.max_relations) {
    if (warnings) {
      warnings->push_back("model returned " + std::to_string(graph->size()) + " relations; kept the first " +
                          std::to_string(config_.max_relations));
    }
    return truncate_relations(*graph, config_.max_relations);
  }
  return *std::move(graph);
}

SceneGraph Client::extract_scene_graph(const ExtractionRequest& req, Warnings* warnings) const {
  req.image.validate();
  system_template(req.system_template_id);
  Conversation conv{"extract",
                    req.system_template_id,
                    "Extract the scene graph of this image.",
                    &req.image,
                    fixture_key(req, false),
                    fixture_key(req, true)};
  return run(conv, warnings);
}

SceneGraph Client::auto_edit_graph(const AutoEditRequest& req, Warnings* warnings) const {
  req.image.validate();
  system_template(req.system_template_id);
  if (canonicalize_text(req.instruction).empty()) throw ValidationError("instruction is empty");
  Conversation conv{"auto_edit",
                    req.system_template_id,
                    "Current scene graph:\n" + serialize_graph(req.graph, GraphFormat::json) +
                        "\nInstruction: " + req.instruction,
                    &req.image,
                    fixture_key(req, false),
                    fixture_key(req, true)};
  SceneGraph edited = run(conv, warnings);
  const double ratio = alignment_ratio(req.graph, edited);
  if (ratio < kAlignmentThreshold) {
    const std::string msg = "edited graph shares only " + std::to_string(static_cast<int>(ratio * 100.0 + 0.5)) +
                            "% of the input relations; the model may have rewritten the scene";
    spdlog::warn("{}", msg);
    if (warnings) warnings->push_back(msg);
  }
  return edited;
}

}  // namespace venus::mllm
