#include "api.hpp"

#include "venus/graph_edit.hpp"
#include "venus/image.hpp"
#include "venus/text.hpp"

namespace venus::cli {

using json = nlohmann::json;

int exit_code_for(const Error& e) {
  const auto& k = e.kind();
  if (k == "config" || k == "validation" || k == "parse" || k == "edit" || k == "io") return kExitUsage;
  return kExitRuntime;
}

int http_status_for(const Error& e) {
  const auto& k = e.kind();
  if (k == "config" || k == "validation" || k == "parse" || k == "edit" || k == "dimension") return 400;
  if (k == "endpoint" || k == "extraction" || k == "protocol") return 502;
  if (k == "io") return 404;
  return 500;
}

SceneGraph load_graph_file(const std::filesystem::path& path, Warnings* warnings) {
  const auto text = read_file(path);
  try {
    return parse_graph(text, sniff_graph_format(text), {}, warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset(), e.is_line());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

SceneGraph graph_from_value(const json& value, Warnings* warnings) {
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    return parse_graph(text, sniff_graph_format(text), {}, warnings);
  }
  if (value.is_object()) return graph_from_json(value, {}, warnings);
  throw ValidationError("graph must be a JSON object or a string");
}

std::string render_graph(const SceneGraph& graph, GraphFormat format) {
  if (format == GraphFormat::dsl) return serialize_graph(graph, GraphFormat::dsl);
  return graph_to_json(graph).dump(2) + "\n";
}

GraphFormat parse_format(std::string_view name) {
  if (name == "json") return GraphFormat::json;
  if (name == "dsl") return GraphFormat::dsl;
  throw ValidationError("unknown graph format \"" + std::string(name) + "\" (expected json or dsl)");
}

std::string compile_bytes(const SceneGraph& source, const SceneGraph& target, const TokenBudget& budget) {
  return serialize_bundle(compile_bundle(source, target, budget));
}

std::string diff_bytes(const SceneGraph& source, const SceneGraph& target) {
  return delta_to_json(compute_delta(source, target)).dump(2) + "\n";
}

namespace {

const json* opt(const json& body, const char* key) {
  auto it = body.find(key);
  return it == body.end() || it->is_null() ? nullptr : &*it;
}

std::string string_field(const json& body, const char* key) {
  const json* v = opt(body, key);
  if (!v->is_string()) throw ValidationError(std::string("field \"") + key + "\" must be a string");
  return v->get<std::string>();
}

}  // namespace

EditJob job_from_json(const json& body, const TokenBudget& budget) {
  if (!body.is_object()) throw ValidationError("request body must be a JSON object");
  EditJob job;
  job.budget = budget;
  if (!opt(body, "image")) throw ValidationError("missing field \"image\"");
  try {
    job.image_bytes = base64_decode(string_field(body, "image"));
  } catch (const ParseError&) {
    throw ValidationError("field \"image\" is not valid base64");
  }
  if (const json* v = opt(body, "source_graph")) job.source_graph = graph_from_value(*v);
  if (const json* v = opt(body, "target_graph")) job.target_graph = graph_from_value(*v);
  if (const json* v = opt(body, "ops")) job.ops = edit_ops_from_json(*v);
  if (opt(body, "instruction")) job.instruction = string_field(body, "instruction");
  if (opt(body, "mode")) job.mode = parse_edit_mode(string_field(body, "mode"));
  if (opt(body, "gttp")) job.gttp = string_field(body, "gttp");
  if (const json* p = opt(body, "params")) {
    if (!p->is_object()) throw ValidationError("field \"params\" must be an object");
    try {
      if (p->contains("steps")) job.params.steps = p->at("steps").get<int>();
      if (p->contains("skip")) job.params.skip = p->at("skip").get<int>();
      if (p->contains("guidance_scale")) job.params.guidance_scale = p->at("guidance_scale").get<double>();
      if (p->contains("seed")) job.params.seed = p->at("seed").get<std::uint64_t>();
      if (p->contains("backend")) job.params.backend = p->at("backend").get<std::string>();
    } catch (const json::exception&) {
      throw ValidationError("field \"params\" has a value of the wrong type");
    }
  }
  job.validate();
  return job;
}

}  // namespace venus::cli
