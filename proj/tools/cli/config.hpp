#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "venus/mllm_client.hpp"
#include "venus/pipeline.hpp"
#include "venus/prompt_compiler.hpp"

namespace venus::cli {

/// Returns the variable's value or nullptr. Injected so tests never touch the
/// process environment.
using EnvLookup = std::function<const char*(const char*)>;
EnvLookup process_env();

struct CliConfig {
  mllm::EndpointConfig mllm;
  std::filesystem::path runs_dir = "runs";
  std::optional<std::string> backend_url;
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::optional<std::filesystem::path> static_dir;
  TokenBudget budget;

  bool has_mllm() const { return !mllm.base_url.empty() || mllm.fixture_mode(); }
  /// Throws ConfigError. MLLM settings are only checked when present.
  void validate() const;
};

/// Values given on the command line; unset fields fall through to the
/// environment and then the config file.
struct Overrides {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::string> mllm_base_url;
  std::optional<std::string> mllm_model;
  std::optional<std::filesystem::path> mllm_fixtures;
  std::optional<int> mllm_max_retries;
  std::optional<double> mllm_timeout_s;
  std::optional<std::filesystem::path> runs_dir;
  std::optional<std::string> backend_url;
  std::optional<std::size_t> max_tokens;
  std::optional<std::size_t> max_relations;
};

/// Precedence: flags > environment > config file > defaults. The config
/// file comes from --config or VENUS_CONFIG; relative paths inside it
/// resolve against the file's directory. Throws ConfigError.
CliConfig resolve_config(const Overrides& flags, const EnvLookup& env);

/// Applies a parsed config document onto `cfg`. Unknown keys are rejected.
void apply_config_json(CliConfig& cfg, const nlohmann::json& doc, const std::filesystem::path& base_dir);

std::shared_ptr<mllm::Client> make_mllm_client(const CliConfig& cfg);
PipelineContext make_pipeline_context(const CliConfig& cfg);

}  // namespace venus::cli
