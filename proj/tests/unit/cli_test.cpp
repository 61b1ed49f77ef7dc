#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "api.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "generators.hpp"
#include "test_util.hpp"
#include "venus/image.hpp"

namespace venus::cli {
namespace {

using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    runs = (dir / "runs").string();
    image = (dir / "horse.png").string();
    write_file(image, encode_png(testing::pattern_image(48, 32)));
  }

  Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    auto lookup = [this](const char* name) -> const char* {
      auto it = env.find(name);
      return it == env.end() ? nullptr : it->second.c_str();
    };
    const int code = run_cli(args, out, err, lookup);
    return {code, out.str(), err.str()};
  }

  static std::string fixture(const std::string& rel) { return testing::fixture_path(rel).string(); }

  testing::TempDir dir;
  std::string runs;
  std::string image;
  std::map<std::string, std::string> env;
};

TEST_F(Cli, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, "0.3.0\n");
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"compile", "--source", "x"}).code, 2);
}

TEST_F(Cli, CompileToStdoutAndFile) {
  const auto r = run({"compile", "--source", fixture("graphs/horse.json"), "--target", fixture("graphs/zebra.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["tgt"], "zebra standing on field, sky above field");
  EXPECT_EQ(doc["src"], "sky above field");

  const auto out_path = (dir / "bundle.json").string();
  const auto f = run({"compile", "--source", fixture("graphs/horse.json"), "--target", fixture("graphs/zebra.json"),
                      "--out", out_path});
  ASSERT_EQ(f.code, 0);
  EXPECT_EQ(read_file(out_path), r.out);
  EXPECT_NE(f.out.find("tgt_new: zebra standing on field"), std::string::npos);
}

TEST_F(Cli, CompileHonoursBudgetFlags) {
  const auto r = run({"--max-relations", "1", "compile", "--source", fixture("graphs/horse.json"), "--target",
                      fixture("graphs/zebra.json")});
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["tgt"], "zebra standing on field");
  EXPECT_EQ(doc["truncated"].size(), 1u);
}

TEST_F(Cli, CompileErrorsExitTwo) {
  write_file(dir / "bad.dsl", "dog -[]-> bench\n");
  const auto r = run({"compile", "--source", (dir / "bad.dsl").string(), "--target", fixture("graphs/zebra.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("parse error"), std::string::npos);
  EXPECT_NE(r.err.find("bad.dsl"), std::string::npos);
  EXPECT_EQ(run({"compile", "--source", "/nonexistent.json", "--target", fixture("graphs/zebra.json")}).code, 2);
}

TEST_F(Cli, DiffMoonRemoval) {
  const auto r = run({"diff", "--source", fixture("graphs/moon_sky.dsl"), "--target", fixture("graphs/moon_removed.dsl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc["added"].empty());
  ASSERT_EQ(doc["removed"].size(), 1u);
  EXPECT_EQ(doc["removed"][0]["subject"], "moon");
}

TEST_F(Cli, EditMockEndToEnd) {
  const auto r = run({"--runs-dir", runs, "edit", "--image", image, "--source-graph", fixture("graphs/horse.json"),
                      "--target-graph", fixture("graphs/zebra.json"), "--id", "h2z"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("run: h2z"), std::string::npos);
  EXPECT_NE(r.out.find("status: done"), std::string::npos);
  const auto manifest = json::parse(read_file(dir / "runs" / "h2z" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "done");
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "h2z" / "output.png"));
  EXPECT_EQ(run({"verify-run", "--run-dir", (dir / "runs" / "h2z").string()}).code, 0);
}

TEST_F(Cli, EditUsageErrors) {
  const std::vector<std::string> base = {"--runs-dir", runs, "edit", "--image", image, "--source-graph",
                                         fixture("graphs/horse.json")};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  auto r = with({"--mode", "text_gttp"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("gttp"), std::string::npos);
  r = with({"--target-graph", fixture("graphs/zebra.json"), "--skip", "60", "--steps", "50"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("skip"), std::string::npos);
  EXPECT_EQ(with({"--target-graph", fixture("graphs/zebra.json"), "--ops", fixture("graphs/horse_to_zebra.ops.json")}).code, 2);
  EXPECT_EQ(with({}).code, 2);
  EXPECT_EQ(with({"--target-graph", fixture("graphs/zebra.json"), "--backend", "sd21"}).code, 2);
  EXPECT_EQ(with({"--target-graph", fixture("graphs/zebra.json"), "--backend", "remote"}).code, 2);
  EXPECT_EQ(with({"--instruction", "make it a zebra"}).code, 2);  // no MLLM configured
  EXPECT_FALSE(std::filesystem::exists(runs));
}

TEST_F(Cli, EditStageFailureExitsOne) {
  const auto r = run({"--runs-dir", runs, "edit", "--image", image, "--source-graph", fixture("graphs/horse.json"),
                      "--ops", fixture("graphs/horse_to_zebra.ops.json"), "--id", "x"});
  ASSERT_EQ(r.code, 0) << r.err;
  write_file(dir / "bad_ops.json", R"({"ops":[{"op":"remove_node","node":"unicorn"}]})");
  const auto f = run({"--runs-dir", runs, "edit", "--image", image, "--source-graph", fixture("graphs/horse.json"),
                      "--ops", (dir / "bad_ops.json").string(), "--id", "y"});
  EXPECT_EQ(f.code, 1);
  EXPECT_NE(f.err.find("failed in stage resolve_target"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "y" / "manifest.json"));
}

TEST_F(Cli, ExtractFixtureMode) {
  const auto out = (dir / "graph.json").string();
  const auto r = run({"--mllm-fixtures", fixture("mllm"), "extract", "--image", fixture("images/dog_bench.png"), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("relations: 1"), std::string::npos);
  EXPECT_EQ(parse_graph_json(read_file(out)).keys()[0].phrase(), "dog sitting on bench");
}

TEST_F(Cli, ExtractFixtureModeFromEnvironment) {
  env["VENUS_MLLM_FIXTURES"] = fixture("mllm");
  const auto r = run({"extract", "--image", fixture("images/dog_bench.png"), "--format", "dsl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "dog -[sitting on]-> bench\n");
}

TEST_F(Cli, ExtractErrors) {
  auto r = run({"extract", "--image", image});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
  r = run({"--mllm-fixtures", fixture("mllm"), "extract", "--image", "/nonexistent/photo.png"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/photo.png"), std::string::npos);
  r = run({"--mllm-fixtures", (dir / "empty").string(), "extract", "--image", image});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no fixture"), std::string::npos);
}

TEST_F(Cli, AutoEditFixtureMode) {
  const auto r = run({"--mllm-fixtures", fixture("mllm"), "auto-edit", "--image", fixture("images/horse.png"), "--graph",
                      fixture("graphs/horse.json"), "--instruction", "turn the horse into a zebra"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto edited = parse_graph_json(r.out);
  const auto zebra = parse_graph_json(read_file(fixture("graphs/zebra.json")));
  EXPECT_TRUE(semantically_equal(edited, zebra));
}

TEST_F(Cli, EditWithInstructionInFixtureMode) {
  const auto r = run({"--runs-dir", runs, "--mllm-fixtures", fixture("mllm"), "edit", "--image", fixture("images/horse.png"),
                      "--source-graph", fixture("graphs/horse.json"), "--instruction", "turn the horse into a zebra",
                      "--id", "ins"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = json::parse(read_file(dir / "runs" / "ins" / "manifest.json"));
  EXPECT_EQ(m["prompt_bundle"]["tgt_new"], "zebra standing on field");
}

TEST_F(Cli, EvalReport) {
  write_file(dir / "a.png", encode_png(ImageBuffer(16, 16, 128)));
  write_file(dir / "b.png", encode_png(ImageBuffer(16, 16, 130)));
  write_file(dir / "eval.json", R"({"entries":[{"id":"x","source_image_path":"a.png","edited_image_path":"b.png"},
                                              {"id":"y","source_image_path":"a.png","edited_image_path":"gone.png"}]})");
  const auto r = run({"eval", "--manifest", (dir / "eval.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_NEAR(doc["items"][0]["psnr_db"].get<double>(), 42.1102, 1e-3);
  EXPECT_NE(r.err.find("scored: 1, skipped: 1"), std::string::npos);
  EXPECT_EQ(run({"eval", "--manifest", (dir / "eval.json").string(), "--metrics", "lpips"}).code, 2);
}

TEST_F(Cli, ToyDemo) {
  const auto r = run({"toy-demo", "--steps", "20", "--skip", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_LT(doc["recon_error"].get<double>(), 1e-5);
  EXPECT_EQ(run({"toy-demo", "--skip", "50"}).code, 2);
}

TEST_F(Cli, FixtureKeyMatchesLibrary) {
  const auto r = run({"fixture-key", "--image", fixture("images/dog_bench.png")});
  ASSERT_EQ(r.code, 0);
  const auto img = mllm::ImagePayload::from_bytes(read_file(fixture("images/dog_bench.png")));
  EXPECT_EQ(r.out, mllm::fixture_key(mllm::ExtractionRequest{img}) + "\n");
  EXPECT_EQ(run({"fixture-key", "--kind", "auto-edit", "--image", image}).code, 2);
}

Overrides with_file(const std::filesystem::path& file, std::optional<std::filesystem::path> runs_dir = {}) {
  Overrides o;
  o.config_file = file;
  o.runs_dir = std::move(runs_dir);
  return o;
}

TEST_F(Cli, ConfigPrecedence) {
  write_file(dir / "venus.json", json{{"runs_dir", "from-file"}, {"budget", {{"max_relations", 4}}}}.dump());
  auto cfg = resolve_config(with_file(dir / "venus.json"), [](const char*) -> const char* { return nullptr; });
  EXPECT_EQ(cfg.runs_dir, dir / "from-file");
  EXPECT_EQ(cfg.budget.max_relations, 4u);

  env["VENUS_RUNS_DIR"] = "from-env";
  auto lookup = [this](const char* n) -> const char* {
    auto it = env.find(n);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  cfg = resolve_config(with_file(dir / "venus.json"), lookup);
  EXPECT_EQ(cfg.runs_dir, "from-env");
  cfg = resolve_config(with_file(dir / "venus.json", "from-flag"), lookup);
  EXPECT_EQ(cfg.runs_dir, "from-flag");

  write_file(dir / "typo.json", R"({"run_dir":"x"})");
  EXPECT_THROW(resolve_config(with_file(dir / "typo.json"), lookup), ConfigError);
  EXPECT_EQ(run({"--config", (dir / "typo.json").string(), "toy-demo"}).code, 2);
  EXPECT_EQ(run({"--config", (dir / "missing.json").string(), "toy-demo"}).code, 2);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(ValidationError("x")), 2);
  EXPECT_EQ(exit_code_for(ParseError("x", 0)), 2);
  EXPECT_EQ(exit_code_for(EditError(0, "x")), 2);
  EXPECT_EQ(exit_code_for(IoError("x")), 2);
  EXPECT_EQ(exit_code_for(EndpointError("x")), 1);
  EXPECT_EQ(exit_code_for(ProtocolError("x")), 1);
  EXPECT_EQ(exit_code_for(NumericError(1, "x")), 1);
  EXPECT_EQ(http_status_for(ValidationError("x")), 400);
  EXPECT_EQ(http_status_for(EndpointError("x")), 502);
  EXPECT_EQ(http_status_for(IoError("x")), 404);
  EXPECT_EQ(http_status_for(NumericError(1, "x")), 500);
}

}  // namespace
}  // namespace venus::cli
