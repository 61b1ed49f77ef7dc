#include "venus/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>

#include "venus/error.hpp"
#include "venus/image.hpp"
#include "venus/metrics.hpp"
#include "venus/text.hpp"

namespace venus {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string excerpt(std::string_view s, std::size_t limit = 200) {
  if (s.size() <= limit) return std::string(s);
  return std::string(s.substr(0, limit)) + "...";
}

std::string utc_timestamp(std::chrono::system_clock::time_point tp, bool compact) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp - secs).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, compact ? "%Y%m%dT%H%M%SZ" : "%Y-%m-%dT%H:%M:%S", &tm);
  if (compact) return buf;
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

json to_plain(const ordered_json& doc) { return json::parse(doc.dump()); }

// Field accessors for protocol documents; every error names the field path.
const json& field(const json& doc, const std::string& path, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw ProtocolError("missing field \"" + path + name + "\"");
  return *it;
}

std::string str_field(const json& doc, const std::string& path, const char* name) {
  const auto& v = field(doc, path, name);
  if (!v.is_string()) throw ProtocolError("field \"" + path + name + "\" must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const json& doc, const std::string& path, const char* name) {
  const auto& v = field(doc, path, name);
  if (!v.is_number_integer()) throw ProtocolError("field \"" + path + name + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::string decode_image_field(const json& doc) {
  const auto text = str_field(doc, "", "image");
  try {
    return base64_decode(text);
  } catch (const ParseError&) {
    throw ProtocolError("field \"image\" is not valid base64");
  }
}

ordered_json budget_to_json(const TokenBudget& b) {
  return {{"max_tokens", b.max_tokens}, {"max_relations", b.max_relations}, {"counter", b.counter}};
}

TokenBudget budget_from_json(const json& doc) {
  TokenBudget b;
  b.max_tokens = doc.at("max_tokens").get<std::size_t>();
  b.max_relations = doc.at("max_relations").get<std::size_t>();
  b.counter = doc.at("counter").get<std::string>();
  return b;
}

}  // namespace

void EditParams::validate() const {
  if (steps < 1) throw ValidationError("steps must be >= 1, got " + std::to_string(steps));
  if (skip < 0 || skip >= steps) {
    throw ValidationError("skip must satisfy 0 <= skip < steps, got skip " + std::to_string(skip) + " with steps " +
                          std::to_string(steps));
  }
  if (!(guidance_scale >= 0.0)) throw ValidationError("guidance_scale must be >= 0");
  if (backend.empty()) throw ValidationError("backend name is empty");
}

ordered_json params_to_json(const EditParams& p, bool with_backend) {
  ordered_json doc{{"steps", p.steps}, {"skip", p.skip}, {"guidance_scale", p.guidance_scale}, {"seed", p.seed}};
  if (with_backend) doc["backend"] = p.backend;
  return doc;
}

std::string_view to_string(EditMode mode) { return mode == EditMode::scene_graph ? "scene_graph" : "text_gttp"; }

EditMode parse_edit_mode(std::string_view text) {
  if (text == "scene_graph") return EditMode::scene_graph;
  if (text == "text_gttp") return EditMode::text_gttp;
  throw ValidationError("unknown mode \"" + std::string(text) + "\" (expected scene_graph or text_gttp)");
}

void EditJob::validate() const {
  params.validate();
  budget.validate();
  if (!image_bytes && image_path.empty()) throw ValidationError("edit job has no image");
  if (mode == EditMode::text_gttp) {
    if (!gttp || canonicalize_text(*gttp).empty()) throw ValidationError("text_gttp mode requires a gttp prompt");
    return;
  }
  const int targets = (target_graph ? 1 : 0) + (ops ? 1 : 0) + (instruction ? 1 : 0);
  if (targets != 1) {
    throw ValidationError("scene_graph mode needs exactly one of target graph, edit ops or instruction");
  }
  if (instruction && canonicalize_text(*instruction).empty()) throw ValidationError("instruction is empty");
}

bool EditJob::needs_mllm() const {
  return !source_graph || (mode == EditMode::scene_graph && instruction.has_value());
}

// --- protocol --------------------------------------------------------------

ordered_json backend_request_to_json(const BackendRequest& r) {
  ordered_json doc;
  doc["image"] = base64_encode(r.image_png);
  doc["src_prompt"] = r.src_prompt;
  doc["tgt_prompt"] = r.tgt_prompt;
  doc["tgt_new"] = r.tgt_new;
  doc["tgt_bgd"] = r.tgt_bgd;
  doc["params"] = params_to_json(r.params, false);
  return doc;
}

BackendRequest backend_request_from_json(const json& doc) {
  if (!doc.is_object()) throw ProtocolError("request must be a JSON object");
  BackendRequest r;
  r.image_png = decode_image_field(doc);
  r.src_prompt = str_field(doc, "", "src_prompt");
  r.tgt_prompt = str_field(doc, "", "tgt_prompt");
  r.tgt_new = str_field(doc, "", "tgt_new");
  r.tgt_bgd = str_field(doc, "", "tgt_bgd");
  const auto& p = field(doc, "", "params");
  if (!p.is_object()) throw ProtocolError("field \"params\" must be an object");
  r.params.steps = static_cast<int>(int_field(p, "params.", "steps"));
  r.params.skip = static_cast<int>(int_field(p, "params.", "skip"));
  const auto& scale = field(p, "params.", "guidance_scale");
  if (!scale.is_number()) throw ProtocolError("field \"params.guidance_scale\" must be a number");
  r.params.guidance_scale = scale.get<double>();
  const auto seed = int_field(p, "params.", "seed");
  if (seed < 0) throw ProtocolError("field \"params.seed\" must be non-negative");
  r.params.seed = static_cast<std::uint64_t>(seed);
  try {
    r.params.validate();
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("invalid params: ") + e.what());
  }
  return r;
}

ordered_json backend_response_to_json(const BackendResponse& r) {
  ordered_json doc;
  doc["image"] = base64_encode(r.image_png);
  doc["backend"] = {{"name", r.backend.name},
                    {"version", r.backend.version},
                    {"prompt_convention", r.backend.prompt_convention}};
  doc["timing_ms"] = r.timing_ms;
  return doc;
}

BackendResponse backend_response_from_json(const json& doc) {
  if (!doc.is_object()) throw ProtocolError("response must be a JSON object");
  BackendResponse r;
  r.image_png = decode_image_field(doc);
  const auto& b = field(doc, "", "backend");
  if (!b.is_object()) throw ProtocolError("field \"backend\" must be an object");
  r.backend.name = str_field(b, "backend.", "name");
  r.backend.version = str_field(b, "backend.", "version");
  r.backend.prompt_convention = str_field(b, "backend.", "prompt_convention");
  if (r.backend.prompt_convention != "concat" && r.backend.prompt_convention != "split") {
    throw ProtocolError("field \"backend.prompt_convention\" must be \"concat\" or \"split\"");
  }
  r.timing_ms = int_field(doc, "", "timing_ms");
  return r;
}

BackendResponse MockBackend::edit(const BackendRequest& req) const {
  ImageBuffer img = decode_png(req.image_png);
  if (!req.tgt_new.empty()) {
    std::uint64_t state = fnv1a64(req.tgt_new + '\n' + std::to_string(req.params.seed));
    for (int y = 0; y < std::min(kMockBlock, img.height); ++y) {
      for (int x = 0; x < std::min(kMockBlock, img.width); ++x) {
        for (int c = 0; c < 3; ++c) {
          state = splitmix64(state);
          // Offsets in [1, 255] so every sample in the block changes.
          img.at(x, y, c) = static_cast<std::uint8_t>(img.at(x, y, c) + 1 + state % 255);
        }
      }
    }
  }
  ordered_json record{{"src_prompt", req.src_prompt},
                      {"tgt_prompt", req.tgt_prompt},
                      {"tgt_new", req.tgt_new},
                      {"tgt_bgd", req.tgt_bgd},
                      {"params", params_to_json(req.params, false)}};
  BackendResponse resp;
  resp.image_png = encode_png(img, {{std::string(kPromptRecordKey), record.dump()}});
  resp.backend = {"mock", "1.0", "split"};
  resp.timing_ms = 0;
  return resp;
}

RemoteBackend::RemoteBackend(std::string base_url, double timeout_s, std::shared_ptr<http::Transport> transport)
    : timeout_s_(timeout_s), transport_(transport ? std::move(transport) : http::default_transport()) {
  const auto u = http::parse_url(base_url);
  url_ = u.origin + u.path + "/v1/edit";
}

BackendResponse RemoteBackend::edit(const BackendRequest& req) const {
  const auto res = transport_->post(url_, backend_request_to_json(req).dump(), {{"Content-Type", "application/json"}},
                                    timeout_s_);
  if (res.status == 0) throw ProtocolError("backend at " + url_ + " unreachable: " + res.error);
  const json doc = json::parse(res.body, nullptr, false);
  if (res.status != 200) {
    std::string why = excerpt(res.body);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) why = doc["error"].get<std::string>();
    throw ProtocolError("backend returned HTTP " + std::to_string(res.status) + ": " + why);
  }
  if (doc.is_discarded()) throw ProtocolError("backend response is not JSON: " + excerpt(res.body));
  BackendResponse resp;
  try {
    resp = backend_response_from_json(doc);
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string("backend response invalid: ") + e.what() + "; response: " + excerpt(res.body));
  }
  try {
    decode_png(resp.image_png);
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string("backend image undecodable: ") + e.what());
  }
  return resp;
}

HandlerReply serve_backend_request(const Backend& backend, std::string_view body) {
  auto error = [](int status, const std::string& msg) { return HandlerReply{status, json{{"error", msg}}.dump()}; };
  const json doc = json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded()) return error(400, "request body is not valid JSON");
  BackendRequest req;
  try {
    req = backend_request_from_json(doc);
  } catch (const ProtocolError& e) {
    return error(400, e.what());
  }
  try {
    return {200, backend_response_to_json(backend.edit(req)).dump()};
  } catch (const ProtocolError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

BackendRegistry BackendRegistry::with_defaults(std::optional<std::string> remote_url) {
  BackendRegistry reg;
  auto mock = std::make_shared<const MockBackend>();
  reg.add("mock", [mock] { return mock; });
  if (remote_url && !remote_url->empty()) {
    auto remote = std::make_shared<const RemoteBackend>(*remote_url);
    reg.add("remote", [remote] { return remote; });
  }
  return reg;
}

void BackendRegistry::add(std::string name, Factory factory) { factories_[std::move(name)] = std::move(factory); }

bool BackendRegistry::has(std::string_view name) const { return factories_.find(name) != factories_.end(); }

std::vector<std::string> BackendRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : factories_) out.push_back(k);
  return out;
}

std::shared_ptr<const Backend> BackendRegistry::get(std::string_view name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) {
    std::string msg = "unknown backend \"" + std::string(name) + "\" (registered: " + join(names(), ", ") + ")";
    if (name == "remote") msg += "; set VENUS_BACKEND_URL to enable it";
    throw ConfigError(msg);
  }
  return it->second();
}

// --- run store -------------------------------------------------------------

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {}

std::string RunStore::allocate_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex_);
  for (;;) {
    char suffix[8];
    std::snprintf(suffix, sizeof suffix, "%06llx", static_cast<unsigned long long>(rng() & 0xffffff));
    std::string id = utc_timestamp(std::chrono::system_clock::now(), true) + "-" + suffix;
    if (!issued_.contains(id) && !exists(id)) {
      issued_.insert(id);
      return id;
    }
  }
}

std::filesystem::path RunStore::run_dir(std::string_view id) const {
  const bool ok = !id.empty() && id.front() != '.' && id.size() <= 128 &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                  });
  if (!ok) throw ValidationError("invalid run id \"" + std::string(id) + "\"");
  return root_ / std::string(id);
}

bool RunStore::exists(std::string_view id) const {
  std::error_code ec;
  return std::filesystem::is_directory(run_dir(id), ec);
}

std::vector<std::string> RunStore::list() const {
  std::vector<std::string> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(root_, ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name.front() != '.') out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ordered_json RunStore::read_manifest(std::string_view id) const {
  const auto path = run_dir(id) / "manifest.json";
  const auto bytes = read_file(path);
  try {
    return ordered_json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError("corrupt manifest " + path.string(), e.byte);
  }
}

void RunStore::publish(std::string_view id, const std::map<std::string, std::string>& files) const {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto final_dir = run_dir(id);
  std::filesystem::create_directories(root_);
  const auto staging = root_ / (".staging-" + std::string(id) + "-" + std::to_string(rng() % 1000000));
  std::error_code ec;
  try {
    std::filesystem::create_directory(staging);
    for (const auto& [name, bytes] : files) write_file(staging / name, bytes);
    std::filesystem::rename(staging, final_dir, ec);
    if (ec) throw IoError("cannot publish run directory " + final_dir.string() + ": " + ec.message());
  } catch (...) {
    std::filesystem::remove_all(staging, ec);
    throw;
  }
}

// --- run_edit --------------------------------------------------------------

namespace {

ordered_json job_echo(const EditJob& job) {
  ordered_json doc;
  doc["mode"] = to_string(job.mode);
  doc["image_path"] = job.image_bytes ? ordered_json(nullptr) : ordered_json(job.image_path.string());
  doc["gttp"] = job.gttp ? ordered_json(*job.gttp) : ordered_json(nullptr);
  doc["instruction"] = job.instruction ? ordered_json(*job.instruction) : ordered_json(nullptr);
  if (job.ops) {
    auto ops = ordered_json::array();
    for (const auto& op : *job.ops) ops.push_back(edit_op_to_json(op));
    doc["ops"] = std::move(ops);
  } else {
    doc["ops"] = nullptr;
  }
  doc["target_source"] = job.mode == EditMode::text_gttp ? "gttp"
                         : job.target_graph         ? "graph"
                         : job.ops                  ? "ops"
                                                    : "instruction";
  doc["params"] = params_to_json(job.params);
  doc["budget"] = budget_to_json(job.budget);
  return doc;
}

struct StageFailure {
  std::string stage;
  std::string kind;
  std::string message;
};

}  // namespace

RunResult run_edit(const EditJob& job, const PipelineContext& ctx) {
  job.validate();
  if (!ctx.runs) throw ConfigError("no runs directory configured");
  const auto backend = ctx.backends.get(job.params.backend);
  if (job.needs_mllm() && !ctx.mllm) {
    throw ConfigError(job.source_graph ? "instruction-based edits need an MLLM endpoint"
                                       : "a job without a source graph needs an MLLM endpoint for extraction");
  }
  const std::string id = job.id.empty() ? ctx.runs->allocate_id() : job.id;
  if (ctx.runs->exists(id)) throw ValidationError("run \"" + id + "\" already exists");

  const auto started = std::chrono::system_clock::now();
  ordered_json m;
  m["id"] = id;
  m["status"] = "running";
  m["job"] = job_echo(job);
  Warnings warnings;
  std::string stage = "load";
  std::string input_bytes;

  auto finish = [&](std::optional<StageFailure> failure, std::map<std::string, std::string> files) {
    const auto ended = std::chrono::system_clock::now();
    if (failure) {
      m["status"] = "failed";
      m["failure"] = {{"stage", failure->stage}, {"kind", failure->kind}, {"message", failure->message}};
      files.clear();
    } else {
      m["status"] = "done";
    }
    m["warnings"] = warnings;
    m["timestamps"] = {
        {"started", utc_timestamp(started, false)},
        {"finished", utc_timestamp(ended, false)},
        {"wall_ms", std::chrono::duration_cast<std::chrono::milliseconds>(ended - started).count()}};
    files["manifest.json"] = m.dump(2) + "\n";
    ctx.runs->publish(id, files);
    if (failure) spdlog::warn("run {} failed in stage {}: {}", id, failure->stage, failure->message);
    return RunResult{id, ctx.runs->run_dir(id), m};
  };

  try {
    input_bytes = job.image_bytes ? *job.image_bytes : read_file(job.image_path);
    const ImageBuffer input = decode_png(input_bytes);

    stage = "extract";
    SceneGraph source;
    if (job.source_graph) {
      source = *job.source_graph;
    } else {
      source = ctx.mllm->extract_scene_graph({mllm::ImagePayload::from_bytes(input_bytes)}, &warnings);
    }

    stage = "resolve_target";
    SceneGraph target;
    if (job.mode == EditMode::text_gttp) {
      target = source;
    } else if (job.target_graph) {
      target = *job.target_graph;
    } else if (job.ops) {
      target = apply_edits(source, *job.ops, &warnings);
    } else {
      mllm::AutoEditRequest req{mllm::ImagePayload::from_bytes(input_bytes), source, *job.instruction};
      target = ctx.mllm->auto_edit_graph(req, &warnings);
    }
    m["source_graph"] = graph_to_json(source);
    m["target_graph"] = graph_to_json(target);

    stage = "compile";
    const PromptBundle bundle = compile_bundle(source, target, job.budget);
    m["prompt_bundle"] = bundle_to_json(bundle);
    m["delta"] = delta_to_json(compute_delta(source, target));
    for (const auto& d : bundle.truncated) {
      warnings.push_back("dropped " + d.segment + " relation \"" + d.triplet.subject + " " + d.triplet.predicate +
                         " " + d.triplet.object + "\" (" + d.reason + ")");
    }

    BackendRequest req;
    req.image_png = input_bytes;
    req.src_prompt = bundle.src_caption;
    req.params = job.params;
    if (job.mode == EditMode::text_gttp) {
      req.tgt_prompt = *job.gttp;
      req.tgt_new = *job.gttp;
      req.tgt_bgd = "";
    } else {
      req.tgt_prompt = bundle.tgt_caption;
      req.tgt_new = bundle.tgt_new_caption;
      req.tgt_bgd = bundle.tgt_bgd_caption;
    }
    m["backend_request"] = {{"src_prompt", req.src_prompt},
                            {"tgt_prompt", req.tgt_prompt},
                            {"tgt_new", req.tgt_new},
                            {"tgt_bgd", req.tgt_bgd},
                            {"params", params_to_json(req.params, false)}};

    stage = "backend";
    const auto t0 = std::chrono::steady_clock::now();
    const BackendResponse resp = backend->edit(req);
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    const ImageBuffer output = decode_png(resp.image_png);
    m["backend"] = {{"registry_name", job.params.backend},
                    {"name", resp.backend.name},
                    {"version", resp.backend.version},
                    {"prompt_convention", resp.backend.prompt_convention},
                    {"timing_ms", resp.timing_ms},
                    {"wall_ms", wall.count()}};

    stage = "metrics";
    ordered_json metrics = ordered_json::object();
    if (output.width != input.width || output.height != input.height) {
      warnings.push_back("backend output is " + std::to_string(output.width) + "x" + std::to_string(output.height) +
                         " but input is " + std::to_string(input.width) + "x" + std::to_string(input.height) +
                         "; metrics skipped");
    } else {
      const auto p = metrics::psnr(input, output);
      metrics["psnr_db"] = p.identical ? ordered_json("inf") : ordered_json(p.db);
      if (input.width >= metrics::kSsim.window && input.height >= metrics::kSsim.window) {
        metrics["ssim"] = metrics::ssim(input, output);
      }
    }
    m["metrics"] = std::move(metrics);
    m["input_image"] = "input.png";
    m["output_image"] = "output.png";

    stage = "persist";
    return finish(std::nullopt, {{"input.png", input_bytes}, {"output.png", resp.image_png}});
  } catch (const Error& e) {
    return finish(StageFailure{stage, e.kind(), e.what()}, {});
  } catch (const std::exception& e) {
    return finish(StageFailure{stage, "internal", e.what()}, {});
  }
}

std::string manifest_bundle_bytes(const ordered_json& manifest) {
  auto it = manifest.find("prompt_bundle");
  if (it == manifest.end()) throw ValidationError("manifest has no prompt_bundle");
  return it->dump(2) + "\n";
}

std::vector<std::string> verify_manifest(const ordered_json& manifest) {
  std::vector<std::string> problems;
  for (const char* k : {"source_graph", "target_graph", "prompt_bundle", "job"}) {
    if (!manifest.contains(k)) problems.push_back(std::string("missing ") + k);
  }
  if (!problems.empty()) return problems;
  try {
    const auto source = graph_from_json(to_plain(manifest["source_graph"]));
    const auto target = graph_from_json(to_plain(manifest["target_graph"]));
    const auto budget = budget_from_json(to_plain(manifest["job"]["budget"]));
    const auto recompiled = serialize_bundle(compile_bundle(source, target, budget));
    if (recompiled != manifest_bundle_bytes(manifest)) problems.push_back("prompt_bundle differs from recompilation");
    const auto& req = manifest["backend_request"];
    const auto& b = manifest["prompt_bundle"];
    if (req["src_prompt"] != b["src"]) problems.push_back("backend src_prompt differs from bundle src");
    if (manifest["job"]["mode"] == "scene_graph" && req["tgt_prompt"] != b["tgt"]) {
      problems.push_back("backend tgt_prompt differs from bundle tgt");
    }
    if (manifest["job"]["mode"] == "text_gttp" && req["tgt_prompt"] != manifest["job"]["gttp"]) {
      problems.push_back("backend tgt_prompt differs from gttp");
    }
  } catch (const std::exception& e) {
    problems.push_back(std::string("cannot recompile: ") + e.what());
  }
  return problems;
}

// --- conformance -----------------------------------------------------------

std::vector<ConformanceCheck> run_conformance(const std::string& base_url, const std::string& sample_png,
                                              std::shared_ptr<http::Transport> transport) {
  if (!transport) transport = http::default_transport();
  const auto u = http::parse_url(base_url);
  const std::string url = u.origin + u.path + "/v1/edit";
  const http::Headers headers{{"Content-Type", "application/json"}};
  constexpr double kTimeout = 120.0;

  BackendRequest probe;
  probe.image_png = sample_png;
  probe.src_prompt = "horse standing on field";
  probe.tgt_prompt = "zebra standing on field, horse standing on field";
  probe.tgt_new = "zebra standing on field";
  probe.tgt_bgd = "horse standing on field";
  const auto probe_body = backend_request_to_json(probe).dump();

  std::vector<ConformanceCheck> out;
  auto check = [&](std::string name, auto fn) {
    ConformanceCheck c{std::move(name), false, {}};
    try {
      c.detail = fn();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  };
  auto expect_400 = [&](const std::string& body, const std::string& must_mention) -> std::string {
    const auto res = transport->post(url, body, headers, kTimeout);
    if (res.status != 400) return "expected HTTP 400, got " + std::to_string(res.status);
    const json doc = json::parse(res.body, nullptr, false);
    if (!doc.is_object() || !doc.contains("error") || !doc["error"].is_string()) return "error body lacks \"error\"";
    if (!must_mention.empty() && doc["error"].get<std::string>().find(must_mention) == std::string::npos) {
      return "error message does not name \"" + must_mention + "\"";
    }
    return {};
  };

  std::string first_image;
  check("valid request returns schema-valid response", [&]() -> std::string {
    const auto res = transport->post(url, probe_body, headers, kTimeout);
    if (res.status != 200) return "HTTP " + std::to_string(res.status) + ": " + excerpt(res.body);
    const auto resp = backend_response_from_json(json::parse(res.body));
    decode_png(resp.image_png);
    first_image = resp.image_png;
    return {};
  });
  check("identical requests give identical images", [&]() -> std::string {
    const auto res = transport->post(url, probe_body, headers, kTimeout);
    if (res.status != 200) return "HTTP " + std::to_string(res.status);
    const auto resp = backend_response_from_json(json::parse(res.body));
    return resp.image_png == first_image ? "" : "images differ";
  });
  check("missing field rejected with 400", [&]() {
    json doc = json::parse(probe_body);
    doc.erase("src_prompt");
    return expect_400(doc.dump(), "src_prompt");
  });
  check("invalid params rejected with 400", [&]() {
    json doc = json::parse(probe_body);
    doc["params"]["skip"] = 60;
    return expect_400(doc.dump(), "skip");
  });
  check("malformed body rejected with 400", [&]() { return expect_400("{not json", ""); });
  return out;
}

}  // namespace venus
