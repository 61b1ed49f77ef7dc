#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <mutex>
#include <pthread.h>
#include <thread>

#include "api.hpp"
#include "service.hpp"
#include "venus/image.hpp"
#include "venus/metrics.hpp"
#include "venus/toy_inversion.hpp"

namespace venus::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void init_logging(bool verbose, bool quiet) {
  static std::once_flag once;
  std::call_once(once, [] { spdlog::set_default_logger(spdlog::stderr_color_mt("venus")); });
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::warn);
}

void print_warnings(std::ostream& err, const Warnings& w) {
  for (const auto& line : w) err << "warning: " << line << "\n";
}

void write_output(const std::string& path, const std::string& bytes, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << bytes;
  } else {
    write_file_atomic(path, bytes);
  }
}

std::string read_input(const std::string& path) {
  if (path.empty()) throw ValidationError("input path is empty");
  return read_file(path);
}

// Blocks SIGINT/SIGTERM in every thread started after this call and runs
// `on_signal` from a dedicated waiter thread.
class SignalWaiter {
 public:
  explicit SignalWaiter(std::function<void()> on_signal) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
    thread_ = std::thread([this, fn = std::move(on_signal)] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (!done_) {
        spdlog::warn("signal {} received; shutting down", sig);
        fn();
      }
    });
  }
  ~SignalWaiter() {
    done_ = true;
    pthread_kill(thread_.native_handle(), SIGTERM);
    thread_.join();
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }

 private:
  sigset_t set_{};
  sigset_t old_{};
  std::atomic<bool> done_{false};
  std::thread thread_;
};

struct GlobalOpts {
  std::string config;
  std::string runs_dir;
  std::string mllm_url;
  std::string mllm_model;
  std::string mllm_fixtures;
  std::string backend_url;
  std::optional<int> mllm_retries;
  std::optional<double> mllm_timeout;
  std::optional<std::size_t> max_tokens;
  std::optional<std::size_t> max_relations;
  bool verbose = false;
  bool quiet = false;

  Overrides overrides() const {
    Overrides o;
    if (!config.empty()) o.config_file = config;
    if (!runs_dir.empty()) o.runs_dir = runs_dir;
    if (!mllm_url.empty()) o.mllm_base_url = mllm_url;
    if (!mllm_model.empty()) o.mllm_model = mllm_model;
    if (!mllm_fixtures.empty()) o.mllm_fixtures = mllm_fixtures;
    if (!backend_url.empty()) o.backend_url = backend_url;
    o.mllm_max_retries = mllm_retries;
    o.mllm_timeout_s = mllm_timeout;
    o.max_tokens = max_tokens;
    o.max_relations = max_relations;
    return o;
  }
};

struct ExtractOpts {
  std::string image, out, format = "json";
};
struct AutoEditOpts {
  std::string image, graph, instruction, out, format = "json";
};
struct PairOpts {
  std::string source, target, out;
};
struct EditOpts {
  std::string image, source_graph, target_graph, ops, instruction, mode = "scene_graph", gttp, backend = "mock", id;
  int steps = 50, skip = 25;
  double scale = 7.5;
  std::uint64_t seed = 42;
};
struct EvalOpts {
  std::string manifest, metrics = "psnr,ssim", out;
};
struct ToyOpts {
  toy::DemoOptions demo;
  bool dense = false;
};
struct ServeOpts {
  std::string host, static_dir;
  std::optional<int> port, workers;
};
struct FixtureKeyOpts {
  std::string kind = "extract", image, graph, instruction;
  bool reprompt = false;
};
struct BackendServerOpts {
  std::string host = "127.0.0.1";
  int port = 8090;
};
struct ProtocolCheckOpts {
  std::string url, image;
};
struct VerifyOpts {
  std::string run_dir;
};

// --- commands --------------------------------------------------------------

int cmd_extract(const CliConfig& cfg, const ExtractOpts& o, std::ostream& out, std::ostream& err) {
  const auto format = parse_format(o.format);
  if (!cfg.has_mllm()) throw ConfigError("MLLM endpoint not configured: set VENUS_MLLM_BASE_URL or VENUS_MLLM_FIXTURES");
  const auto client = make_mllm_client(cfg);
  auto payload = mllm::ImagePayload::from_bytes(read_input(o.image));
  Warnings w;
  const auto graph = client->extract_scene_graph({std::move(payload)}, &w);
  print_warnings(err, w);
  write_output(o.out, render_graph(graph, format), out);
  (o.out.empty() ? err : out) << "relations: " << graph.size() << "\n";
  return kExitOk;
}

int cmd_auto_edit(const CliConfig& cfg, const AutoEditOpts& o, std::ostream& out, std::ostream& err) {
  const auto format = parse_format(o.format);
  if (!cfg.has_mllm()) throw ConfigError("MLLM endpoint not configured: set VENUS_MLLM_BASE_URL or VENUS_MLLM_FIXTURES");
  const auto client = make_mllm_client(cfg);
  Warnings w;
  const auto source = load_graph_file(o.graph, &w);
  mllm::AutoEditRequest req{mllm::ImagePayload::from_bytes(read_input(o.image)), source, o.instruction};
  const auto edited = client->auto_edit_graph(req, &w);
  print_warnings(err, w);
  write_output(o.out, render_graph(edited, format), out);
  (o.out.empty() ? err : out) << "relations: " << edited.size() << "\n";
  return kExitOk;
}

int cmd_compile(const CliConfig& cfg, const PairOpts& o, std::ostream& out, std::ostream& err) {
  Warnings w;
  const auto source = load_graph_file(o.source, &w);
  const auto target = load_graph_file(o.target, &w);
  print_warnings(err, w);
  const auto bundle = compile_bundle(source, target, cfg.budget);
  const auto bytes = serialize_bundle(bundle);
  if (o.out.empty() || o.out == "-") {
    out << bytes;
    return kExitOk;
  }
  write_file_atomic(o.out, bytes);
  out << "src: " << bundle.src_caption << "\n"
      << "tgt: " << bundle.tgt_caption << "\n"
      << "tgt_new: " << bundle.tgt_new_caption << "\n"
      << "tgt_bgd: " << bundle.tgt_bgd_caption << "\n"
      << "truncated: " << bundle.truncated.size() << "\n";
  return kExitOk;
}

int cmd_diff(const PairOpts& o, std::ostream& out, std::ostream& err) {
  Warnings w;
  const auto source = load_graph_file(o.source, &w);
  const auto target = load_graph_file(o.target, &w);
  print_warnings(err, w);
  write_output(o.out, diff_bytes(source, target), out);
  return kExitOk;
}

int cmd_edit(const CliConfig& cfg, const EditOpts& o, std::ostream& out, std::ostream& err) {
  EditJob job;
  job.id = o.id;
  job.image_path = o.image;
  job.mode = parse_edit_mode(o.mode);
  if (!o.gttp.empty()) job.gttp = o.gttp;
  if (!o.instruction.empty()) job.instruction = o.instruction;
  job.params = {o.steps, o.skip, o.scale, o.seed, o.backend};
  job.budget = cfg.budget;
  // Job shape first, so usage errors never depend on file contents.
  {
    EditJob probe = job;
    if (!o.target_graph.empty()) probe.target_graph = SceneGraph{};
    if (!o.ops.empty()) probe.ops = std::vector<GraphEditOp>{};
    if (!o.source_graph.empty()) probe.source_graph = SceneGraph{};
    probe.validate();
  }
  Warnings w;
  if (!o.source_graph.empty()) job.source_graph = load_graph_file(o.source_graph, &w);
  if (!o.target_graph.empty()) job.target_graph = load_graph_file(o.target_graph, &w);
  if (!o.ops.empty()) {
    const auto text = read_input(o.ops);
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ParseError(o.ops + ": edit ops are not valid JSON", 0);
    job.ops = edit_ops_from_json(doc);
  }
  print_warnings(err, w);

  const auto ctx = make_pipeline_context(cfg);
  const auto result = run_edit(job, ctx);
  out << "run: " << result.id << "\n"
      << "manifest: " << (result.run_dir / "manifest.json").string() << "\n"
      << "status: " << result.manifest.value("status", "") << "\n";
  if (!result.ok()) {
    const auto& f = result.manifest["failure"];
    err << "venus: run " << result.id << " failed in stage " << f.value("stage", "?") << ": "
        << f.value("message", "") << "\n";
    return kExitRuntime;
  }
  for (const auto& line : result.manifest["warnings"]) err << "warning: " << line.get<std::string>() << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  const auto metrics = metrics::parse_metric_list(o.metrics);
  const auto path = std::filesystem::path(o.manifest);
  const auto manifest = metrics::parse_eval_manifest(read_input(o.manifest), path.parent_path());
  const auto report = metrics::evaluate(manifest, metrics);
  write_output(o.out, metrics::report_to_json(report).dump(2) + "\n", out);
  (o.out.empty() ? err : out) << "scored: " << report.count() << ", skipped: " << report.skipped.size() << "\n";
  return kExitOk;
}

int cmd_toy_demo(ToyOpts o, std::ostream& out) {
  o.demo.diagonal = !o.dense;
  out << toy::run_demo(o.demo).dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(CliConfig cfg, const ServeOpts& o, std::ostream& out) {
  if (!o.host.empty()) cfg.host = o.host;
  if (o.port) cfg.port = *o.port;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.static_dir.empty()) cfg.static_dir = o.static_dir;
  cfg.validate();
  auto ctx = make_pipeline_context(cfg);
  std::unique_ptr<Service> service;
  SignalWaiter waiter([&] {
    if (service) service->stop();
  });
  service = std::make_unique<Service>(cfg, std::move(ctx));
  const int port = service->bind(cfg.host, cfg.port);
  out << "listening on http://" << cfg.host << ":" << port << "\n" << std::flush;
  service->run();
  service->stop();
  return kExitOk;
}

int cmd_backend_server(const BackendServerOpts& o, std::ostream& out) {
  std::unique_ptr<BackendServer> server;
  SignalWaiter waiter([&] {
    if (server) server->stop();
  });
  server = std::make_unique<BackendServer>(std::make_shared<MockBackend>());
  const int port = server->bind(o.host, o.port);
  out << "mock backend listening on http://" << o.host << ":" << port << "/v1/edit\n" << std::flush;
  server->run();
  return kExitOk;
}

int cmd_fixture_key(const FixtureKeyOpts& o, std::ostream& out) {
  auto payload = mllm::ImagePayload::from_bytes(read_input(o.image));
  if (o.kind == "extract") {
    out << mllm::fixture_key(mllm::ExtractionRequest{std::move(payload)}, o.reprompt) << "\n";
    return kExitOk;
  }
  if (o.kind == "auto-edit") {
    if (o.graph.empty() || o.instruction.empty()) throw ValidationError("auto-edit keys need --graph and --instruction");
    mllm::AutoEditRequest req{std::move(payload), load_graph_file(o.graph), o.instruction};
    out << mllm::fixture_key(req, o.reprompt) << "\n";
    return kExitOk;
  }
  throw ValidationError("unknown fixture kind \"" + o.kind + "\" (expected extract or auto-edit)");
}

int cmd_protocol_check(const ProtocolCheckOpts& o, std::ostream& out) {
  std::string png = o.image.empty() ? encode_png(ImageBuffer(32, 32, 96)) : read_input(o.image);
  const auto checks = run_conformance(o.url, png);
  bool all = true;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) out << ": " << c.detail;
    out << "\n";
    all = all && c.passed;
  }
  return all ? kExitOk : kExitRuntime;
}

int cmd_verify(const VerifyOpts& o, std::ostream& out) {
  const auto bytes = read_input((std::filesystem::path(o.run_dir) / "manifest.json").string());
  const auto manifest = ordered_json::parse(bytes, nullptr, false);
  if (manifest.is_discarded()) throw ParseError("manifest is not valid JSON", 0);
  const auto problems = verify_manifest(manifest);
  for (const auto& p : problems) out << "problem: " << p << "\n";
  out << (problems.empty() ? "manifest consistent\n" : "manifest inconsistent\n");
  return problems.empty() ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Scene-graph guided image editing toolchain", "venus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GlobalOpts g;
  app.add_option("--config", g.config, "JSON config file (also VENUS_CONFIG)");
  app.add_option("--runs-dir", g.runs_dir, "Run output directory (also VENUS_RUNS_DIR)");
  app.add_option("--mllm-url", g.mllm_url, "Chat-completion base URL (also VENUS_MLLM_BASE_URL)");
  app.add_option("--mllm-model", g.mllm_model, "Model name (also VENUS_MLLM_MODEL)");
  app.add_option("--mllm-fixtures", g.mllm_fixtures, "Answer MLLM calls from this fixture directory");
  app.add_option("--mllm-retries", g.mllm_retries, "Retries after a failed MLLM call")->check(CLI::NonNegativeNumber);
  app.add_option("--mllm-timeout", g.mllm_timeout, "MLLM request timeout in seconds")->check(CLI::PositiveNumber);
  app.add_option("--backend-url", g.backend_url, "Remote backend base URL (also VENUS_BACKEND_URL)");
  app.add_option("--max-tokens", g.max_tokens, "Token budget per caption")->check(CLI::PositiveNumber);
  app.add_option("--max-relations", g.max_relations, "Relation cap per caption")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Errors only");

  ExtractOpts ex;
  auto* extract = app.add_subcommand("extract", "Extract a scene graph from an image via the MLLM");
  extract->add_option("--image", ex.image, "Input image (PNG or JPEG)")->required();
  extract->add_option("--out", ex.out, "Output graph file (default stdout)");
  extract->add_option("--format", ex.format, "json or dsl");

  AutoEditOpts ae;
  auto* auto_edit = app.add_subcommand("auto-edit", "Edit a scene graph from a text instruction via the MLLM");
  auto_edit->add_option("--image", ae.image, "Input image")->required();
  auto_edit->add_option("--graph", ae.graph, "Current scene graph")->required();
  auto_edit->add_option("--instruction", ae.instruction, "Editing instruction")->required();
  auto_edit->add_option("--out", ae.out, "Output graph file (default stdout)");
  auto_edit->add_option("--format", ae.format, "json or dsl");

  PairOpts cp;
  auto* compile = app.add_subcommand("compile", "Compile source/target prompts from two graphs");
  compile->add_option("--source", cp.source, "Source graph (JSON or DSL)")->required();
  compile->add_option("--target", cp.target, "Target graph (JSON or DSL)")->required();
  compile->add_option("--out", cp.out, "Prompt bundle file (default stdout)");

  PairOpts df;
  auto* diff = app.add_subcommand("diff", "Show the relation delta between two graphs");
  diff->add_option("--source", df.source, "Source graph")->required();
  diff->add_option("--target", df.target, "Target graph")->required();
  diff->add_option("--out", df.out, "Delta file (default stdout)");

  EditOpts ed;
  auto* edit = app.add_subcommand("edit", "Run one edit end to end and persist the run");
  edit->add_option("--image", ed.image, "Input PNG")->required();
  edit->add_option("--source-graph", ed.source_graph, "Source graph (extracted via the MLLM when omitted)");
  auto* tg = edit->add_option("--target-graph", ed.target_graph, "Target graph");
  auto* ops = edit->add_option("--ops", ed.ops, "JSON file of graph edit ops");
  auto* ins = edit->add_option("--instruction", ed.instruction, "Instruction for MLLM graph editing");
  tg->excludes(ops)->excludes(ins);
  ops->excludes(ins);
  edit->add_option("--mode", ed.mode, "scene_graph or text_gttp");
  edit->add_option("--gttp", ed.gttp, "Target prompt used verbatim in text_gttp mode");
  edit->add_option("--backend", ed.backend, "Backend name (mock, remote)");
  edit->add_option("--steps", ed.steps, "Diffusion steps");
  edit->add_option("--skip", ed.skip, "Skipped inversion steps");
  edit->add_option("--scale", ed.scale, "Guidance scale");
  edit->add_option("--seed", ed.seed, "Random seed");
  edit->add_option("--id", ed.id, "Run id (default: timestamp plus random suffix)");

  EvalOpts ev;
  auto* eval = app.add_subcommand("eval", "Score image pairs listed in an eval manifest");
  eval->add_option("--manifest", ev.manifest, "Eval manifest JSON")->required();
  eval->add_option("--metrics", ev.metrics, "Comma separated: psnr,ssim");
  eval->add_option("--out", ev.out, "Report file (default stdout)");

  ToyOpts ty;
  auto* toy_demo = app.add_subcommand("toy-demo", "Run the closed-form inversion sandbox");
  toy_demo->add_option("--dim", ty.demo.dim, "Latent dimension")->check(CLI::PositiveNumber);
  toy_demo->add_option("--steps", ty.demo.steps, "Diffusion steps");
  toy_demo->add_option("--skip", ty.demo.skip, "Skipped inversion steps");
  toy_demo->add_option("--scale", ty.demo.scale, "Guidance scale");
  toy_demo->add_option("--seed", ty.demo.seed, "Seed");
  toy_demo->add_option("--src", ty.demo.src, "Source caption");
  toy_demo->add_option("--tgt", ty.demo.tgt, "Target caption");
  toy_demo->add_flag("--dense", ty.dense, "Dense instead of diagonal denoiser matrix");

  ServeOpts sv;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API and UI assets");
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--port", sv.port, "Port (0 picks a free one)");
  serve->add_option("--workers", sv.workers, "Concurrent edit runs");
  serve->add_option("--static-dir", sv.static_dir, "UI assets directory");

  FixtureKeyOpts fk;
  auto* fixture_key = app.add_subcommand("fixture-key", "Print the MLLM fixture file name for a request");
  fixture_key->add_option("--kind", fk.kind, "extract or auto-edit");
  fixture_key->add_option("--image", fk.image, "Image")->required();
  fixture_key->add_option("--graph", fk.graph, "Graph (auto-edit)");
  fixture_key->add_option("--instruction", fk.instruction, "Instruction (auto-edit)");
  fixture_key->add_flag("--reprompt", fk.reprompt, "Key of the follow-up request after an unparseable reply");

  BackendServerOpts bs;
  auto* backend_server = app.add_subcommand("backend-server", "Serve the mock backend over the wire protocol");
  backend_server->add_option("--host", bs.host, "Bind address");
  backend_server->add_option("--port", bs.port, "Port (0 picks a free one)");

  ProtocolCheckOpts pc;
  auto* protocol_check = app.add_subcommand("protocol-check", "Run wire-protocol conformance checks against a backend");
  protocol_check->add_option("--url", pc.url, "Backend base URL")->required();
  protocol_check->add_option("--image", pc.image, "Probe image (default: generated)");

  VerifyOpts vf;
  auto* verify = app.add_subcommand("verify-run", "Check that a run manifest matches a fresh compilation");
  verify->add_option("--run-dir", vf.run_dir, "Run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "venus: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "run '" << sub->get_name() << " --help' for usage\n";
    return kExitUsage;
  }

  init_logging(g.verbose, g.quiet);
  try {
    const CliConfig cfg = resolve_config(g.overrides(), env);
    if (*toy_demo) return cmd_toy_demo(ty, out);
    if (*fixture_key) return cmd_fixture_key(fk, out);
    if (*backend_server) return cmd_backend_server(bs, out);
    if (*protocol_check) return cmd_protocol_check(pc, out);
    if (*verify) return cmd_verify(vf, out);
    if (*eval) return cmd_eval(ev, out, err);
    if (*diff) return cmd_diff(df, out, err);
    if (*extract) return cmd_extract(cfg, ex, out, err);
    if (*auto_edit) return cmd_auto_edit(cfg, ae, out, err);
    if (*compile) return cmd_compile(cfg, cp, out, err);
    if (*edit) return cmd_edit(cfg, ed, out, err);
    if (*serve) return cmd_serve(cfg, sv, out);
  } catch (const Error& e) {
    err << "venus: " << e.kind() << " error: " << e.what() << "\n";
    if (const auto* x = dynamic_cast<const ExtractionError*>(&e); x && g.verbose) {
      err << "raw model output:\n" << x->raw_text() << "\n";
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "venus: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace venus::cli
