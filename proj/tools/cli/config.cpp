#include "config.hpp"

#include <cstdlib>
#include <set>

#include "venus/error.hpp"
#include "venus/image.hpp"

namespace venus::cli {

using json = nlohmann::json;

EnvLookup process_env() {
  return [](const char* name) -> const char* { return std::getenv(name); };
}

void CliConfig::validate() const {
  if (has_mllm()) mllm.validate();
  if (runs_dir.empty()) throw ConfigError("runs directory is empty");
  if (backend_url) http::parse_url(*backend_url);
  if (port < 0 || port > 65535) throw ConfigError("port out of range: " + std::to_string(port));
  if (workers < 1) throw ConfigError("workers must be >= 1");
  budget.validate();
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown config key \"" + where + k + "\"");
  }
}

template <typename T>
void take(const json& obj, const char* key, T& dst, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    dst = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key \"" + where + key + "\" has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

const char* nonempty(const EnvLookup& env, const char* name) {
  const char* v = env(name);
  return v && *v ? v : nullptr;
}

}  // namespace

void apply_config_json(CliConfig& cfg, const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  reject_unknown(doc, {"mllm", "runs_dir", "backend_url", "service", "budget"}, "");
  if (auto it = doc.find("mllm"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("config key \"mllm\" must be an object");
    reject_unknown(*it, {"base_url", "api_key", "model", "timeout_s", "max_retries", "max_relations", "fixtures"},
                   "mllm.");
    take(*it, "base_url", cfg.mllm.base_url, "mllm.");
    take(*it, "api_key", cfg.mllm.api_key, "mllm.");
    take(*it, "model", cfg.mllm.model_name, "mllm.");
    take(*it, "timeout_s", cfg.mllm.timeout_s, "mllm.");
    take(*it, "max_retries", cfg.mllm.max_retries, "mllm.");
    take(*it, "max_relations", cfg.mllm.max_relations, "mllm.");
    std::string fixtures;
    take(*it, "fixtures", fixtures, "mllm.");
    if (!fixtures.empty()) cfg.mllm.fixtures_dir = resolve(base_dir, fixtures);
  }
  std::string runs;
  take(doc, "runs_dir", runs, "");
  if (!runs.empty()) cfg.runs_dir = resolve(base_dir, runs);
  std::string backend_url;
  take(doc, "backend_url", backend_url, "");
  if (!backend_url.empty()) cfg.backend_url = backend_url;
  if (auto it = doc.find("service"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("config key \"service\" must be an object");
    reject_unknown(*it, {"host", "port", "workers", "static_dir"}, "service.");
    take(*it, "host", cfg.host, "service.");
    take(*it, "port", cfg.port, "service.");
    take(*it, "workers", cfg.workers, "service.");
    std::string dir;
    take(*it, "static_dir", dir, "service.");
    if (!dir.empty()) cfg.static_dir = resolve(base_dir, dir);
  }
  if (auto it = doc.find("budget"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("config key \"budget\" must be an object");
    reject_unknown(*it, {"max_tokens", "max_relations", "counter"}, "budget.");
    take(*it, "max_tokens", cfg.budget.max_tokens, "budget.");
    take(*it, "max_relations", cfg.budget.max_relations, "budget.");
    take(*it, "counter", cfg.budget.counter, "budget.");
  }
}

CliConfig resolve_config(const Overrides& flags, const EnvLookup& env) {
  CliConfig cfg;

  std::optional<std::filesystem::path> file = flags.config_file;
  if (!file) {
    if (const char* v = nonempty(env, "VENUS_CONFIG")) file = v;
  }
  if (file) {
    std::string bytes;
    try {
      bytes = read_file(*file);
    } catch (const IoError& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    const json doc = json::parse(bytes, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file " + file->string() + " is not valid JSON");
    apply_config_json(cfg, doc, file->parent_path());
  }

  if (const char* v = nonempty(env, "VENUS_MLLM_BASE_URL")) cfg.mllm.base_url = v;
  if (const char* v = nonempty(env, "VENUS_MLLM_API_KEY")) cfg.mllm.api_key = v;
  if (const char* v = nonempty(env, "VENUS_MLLM_MODEL")) cfg.mllm.model_name = v;
  if (const char* v = nonempty(env, "VENUS_MLLM_FIXTURES")) cfg.mllm.fixtures_dir = std::filesystem::path(v);
  if (const char* v = nonempty(env, "VENUS_RUNS_DIR")) cfg.runs_dir = v;
  if (const char* v = nonempty(env, "VENUS_BACKEND_URL")) cfg.backend_url = v;

  if (flags.mllm_base_url) cfg.mllm.base_url = *flags.mllm_base_url;
  if (flags.mllm_model) cfg.mllm.model_name = *flags.mllm_model;
  if (flags.mllm_fixtures) cfg.mllm.fixtures_dir = *flags.mllm_fixtures;
  if (flags.mllm_max_retries) cfg.mllm.max_retries = *flags.mllm_max_retries;
  if (flags.mllm_timeout_s) cfg.mllm.timeout_s = *flags.mllm_timeout_s;
  if (flags.runs_dir) cfg.runs_dir = *flags.runs_dir;
  if (flags.backend_url) cfg.backend_url = *flags.backend_url;
  if (flags.max_tokens) cfg.budget.max_tokens = *flags.max_tokens;
  if (flags.max_relations) cfg.budget.max_relations = *flags.max_relations;

  cfg.validate();
  return cfg;
}

std::shared_ptr<mllm::Client> make_mllm_client(const CliConfig& cfg) {
  if (!cfg.has_mllm()) return nullptr;
  return std::make_shared<mllm::Client>(cfg.mllm);
}

PipelineContext make_pipeline_context(const CliConfig& cfg) {
  PipelineContext ctx;
  ctx.backends = BackendRegistry::with_defaults(cfg.backend_url);
  ctx.mllm = make_mllm_client(cfg);
  ctx.runs = std::make_shared<RunStore>(cfg.runs_dir);
  return ctx;
}

}  // namespace venus::cli
