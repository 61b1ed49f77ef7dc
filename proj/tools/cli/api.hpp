#pragma once

// Request handling shared by the command line and the HTTP service, so both
// produce the same bytes for the same inputs.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "venus/error.hpp"
#include "venus/pipeline.hpp"
#include "venus/prompt_compiler.hpp"
#include "venus/scene_graph.hpp"

namespace venus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Usage, configuration, validation and input errors map to 2; everything
/// that went wrong while doing the work maps to 1.
int exit_code_for(const Error& e);
int http_status_for(const Error& e);

/// Reads JSON or DSL (sniffed) in non-strict mode.
SceneGraph load_graph_file(const std::filesystem::path& path, Warnings* warnings = nullptr);
/// A JSON graph object, or a string holding JSON or DSL text.
SceneGraph graph_from_value(const nlohmann::json& value, Warnings* warnings = nullptr);

/// Pretty JSON or DSL text for files and API bodies.
std::string render_graph(const SceneGraph& graph, GraphFormat format = GraphFormat::json);
GraphFormat parse_format(std::string_view name);

std::string compile_bytes(const SceneGraph& source, const SceneGraph& target, const TokenBudget& budget);
std::string diff_bytes(const SceneGraph& source, const SceneGraph& target);

/// Builds an edit job from an /api/edit body. Throws ValidationError /
/// ParseError naming the bad field.
EditJob job_from_json(const nlohmann::json& body, const TokenBudget& budget);

}  // namespace venus::cli
