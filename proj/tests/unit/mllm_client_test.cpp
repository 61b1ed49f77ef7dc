#include <gtest/gtest.h>

#include <cstdlib>

#include "generators.hpp"
#include "http_fixtures.hpp"
#include "test_util.hpp"
#include "venus/error.hpp"
#include "venus/image.hpp"
#include "venus/mllm_client.hpp"
#include "venus/text.hpp"

namespace venus::mllm {
namespace {

using testing::chat_envelope;
using testing::ScriptedTransport;

const char* kDogBench =
    R"({"objects":[{"id":"1","name":"dog"},{"id":"2","name":"bench"}],)"
    R"("relations":[{"subject_id":"1","predicate":"sitting on","object_id":"2"}]})";

ImagePayload sample_image() { return ImagePayload::from_bytes(encode_png(testing::pattern_image(8, 8))); }

EndpointConfig endpoint() {
  EndpointConfig c;
  c.base_url = "http://mllm.test/v1";
  c.api_key = "sk-secret";
  c.model_name = "vision-model";
  return c;
}

struct Harness {
  explicit Harness(std::vector<http::Response> script, EndpointConfig config = endpoint())
      : transport(std::make_shared<ScriptedTransport>(std::move(script))),
        client(config, transport, [this](std::chrono::duration<double> d) { sleeps.push_back(d.count()); }) {}

  std::shared_ptr<ScriptedTransport> transport;
  std::vector<double> sleeps;
  Client client;
};

http::Response ok(const std::string& content) { return {200, chat_envelope(content), ""}; }

TEST(Config, Validation) {
  EXPECT_THROW(EndpointConfig{}.validate(), ConfigError);
  EndpointConfig fixtures;
  fixtures.fixtures_dir = "/tmp";
  EXPECT_NO_THROW(fixtures.validate());
  auto bad = endpoint();
  bad.base_url = "ftp://x";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = endpoint();
  bad.max_retries = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(Client(EndpointConfig{}), ConfigError);
}

TEST(Config, Environment) {
  ::setenv("VENUS_MLLM_BASE_URL", "http://env.test", 1);
  ::setenv("VENUS_MLLM_MODEL", "env-model", 1);
  const auto c = apply_env(endpoint());
  ::unsetenv("VENUS_MLLM_BASE_URL");
  ::unsetenv("VENUS_MLLM_MODEL");
  EXPECT_EQ(c.base_url, "http://env.test");
  EXPECT_EQ(c.model_name, "env-model");
  EXPECT_EQ(c.api_key, "sk-secret");
}

TEST(Payload, SniffsMediaType) {
  EXPECT_EQ(sample_image().media_type, "png");
  EXPECT_EQ(ImagePayload::from_bytes("\xff\xd8\xff\xe0 jfif").media_type, "jpeg");
  EXPECT_THROW(ImagePayload::from_bytes("GIF89a"), ValidationError);
  EXPECT_EQ(sample_image().data_uri().rfind("data:image/png;base64,", 0), 0u);
}

TEST(Client, RequestShape) {
  Harness h({ok(kDogBench)});
  const auto g = h.client.extract_scene_graph({sample_image()});
  EXPECT_EQ(g.keys()[0].phrase(), "dog sitting on bench");
  const auto calls = h.transport->calls();
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(calls[0].url, "http://mllm.test/v1/chat/completions");
  bool auth = false;
  for (const auto& [k, v] : calls[0].headers) auth = auth || (k == "Authorization" && v == "Bearer sk-secret");
  EXPECT_TRUE(auth);
  const auto body = nlohmann::json::parse(calls[0].body);
  EXPECT_EQ(body["model"], "vision-model");
  EXPECT_EQ(body["temperature"], 0);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], std::string(system_template(kExtractTemplateId)));
  EXPECT_EQ(body["messages"][1]["content"][1]["type"], "image_url");
  EXPECT_EQ(body["messages"][1]["content"][1]["image_url"]["url"], sample_image().data_uri());
}

TEST(Client, ContentAsPartList) {
  nlohmann::json env = {{"choices", {{{"message", {{"content", {{{"type", "text"}, {"text", kDogBench}}}}}}}}}};
  Harness h({{200, env.dump(), ""}});
  EXPECT_EQ(h.client.extract_scene_graph({sample_image()}).size(), 1u);
}

TEST(Client, RetriesWithExponentialBackoff) {
  Harness h({{500, "oops", ""}});
  try {
    h.client.extract_scene_graph({sample_image()});
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.status(), 500);
    EXPECT_NE(std::string(e.what()).find("4 attempts"), std::string::npos);
  }
  EXPECT_EQ(h.transport->calls().size(), 4u);
  EXPECT_EQ(h.sleeps, (std::vector<double>{0.5, 1.0, 2.0}));
}

TEST(Client, RecoversAfterTransientFailures) {
  Harness h({{429, "slow down", ""}, {0, "", "connection refused"}, ok(kDogBench)});
  EXPECT_EQ(h.client.extract_scene_graph({sample_image()}).size(), 1u);
  EXPECT_EQ(h.transport->calls().size(), 3u);
}

TEST(Client, ClientErrorsAreNotRetried) {
  Harness h({{401, R"({"error":"bad key"})", ""}});
  try {
    h.client.extract_scene_graph({sample_image()});
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.status(), 401);
  }
  EXPECT_EQ(h.transport->calls().size(), 1u);
  EXPECT_TRUE(h.sleeps.empty());
}

TEST(Client, MalformedEnvelope) {
  Harness h({{200, R"({"id":"x"})", ""}});
  EXPECT_THROW(h.client.extract_scene_graph({sample_image()}), EndpointError);
}

TEST(Client, RepromptsOnceAfterProse) {
  Harness h({ok("I see a dog on a bench."), ok(std::string("```json\n") + kDogBench + "\n```")});
  EXPECT_EQ(h.client.extract_scene_graph({sample_image()}).size(), 1u);
  const auto calls = h.transport->calls();
  ASSERT_EQ(calls.size(), 2u);
  const auto body = nlohmann::json::parse(calls[1].body);
  ASSERT_EQ(body["messages"].size(), 4u);
  EXPECT_EQ(body["messages"][2]["role"], "assistant");
  EXPECT_EQ(body["messages"][2]["content"], "I see a dog on a bench.");
  EXPECT_EQ(body["messages"][3]["content"], std::string(reprompt_text()));
}

TEST(Client, SecondFailureRaisesWithRawText) {
  Harness h({ok("no graph"), ok(R"({"objects":[{"id":"a","name":"dog"}],"relations":[{"subject_id":"a","predicate":"on","object_id":"zz"}]})")});
  try {
    h.client.extract_scene_graph({sample_image()});
    FAIL();
  } catch (const ExtractionError& e) {
    EXPECT_NE(e.raw_text().find("zz"), std::string::npos);
  }
  EXPECT_EQ(h.transport->calls().size(), 2u);
}

std::string many_relations(int n) {
  nlohmann::json doc = {{"objects", nlohmann::json::array()}, {"relations", nlohmann::json::array()}};
  for (int i = 0; i <= n; ++i) doc["objects"].push_back({{"id", std::to_string(i)}, {"name", "thing" + std::to_string(i)}});
  doc["objects"].push_back({{"id", "lonely"}, {"name", "moon"}});
  for (int i = 0; i < n; ++i) {
    doc["relations"].push_back({{"subject_id", std::to_string(i)}, {"predicate", "near"}, {"object_id", std::to_string(i + 1)}});
  }
  return doc.dump();
}

TEST(Client, CapsRelations) {
  Harness h({ok(many_relations(20))});
  Warnings w;
  const auto g = h.client.extract_scene_graph({sample_image()}, &w);
  EXPECT_EQ(g.size(), 15u);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("kept the first 15"), std::string::npos);
  EXPECT_NE(g.find("lonely"), nullptr);
  EXPECT_NE(g.find("15"), nullptr);
  EXPECT_EQ(g.find("16"), nullptr);
}

TEST(Client, AutoEditAlignmentWarning) {
  const auto source = extract_graph_from_model_text(R"({"objects":[{"id":"h","name":"horse"},{"id":"f","name":"field"},{"id":"s","name":"sky"}],
    "relations":[{"subject_id":"h","predicate":"standing on","object_id":"f"},{"subject_id":"s","predicate":"above","object_id":"f"}]})");
  const std::string aligned = R"({"objects":[{"id":"h","name":"zebra"},{"id":"f","name":"field"},{"id":"s","name":"sky"}],
    "relations":[{"subject_id":"h","predicate":"standing on","object_id":"f"},{"subject_id":"s","predicate":"above","object_id":"f"}]})";
  const std::string rewritten = R"({"objects":[{"id":"a","name":"car"},{"id":"b","name":"road"}],
    "relations":[{"subject_id":"a","predicate":"on","object_id":"b"}]})";
  {
    Harness h({ok(aligned)});
    Warnings w;
    h.client.auto_edit_graph({sample_image(), source, "make the horse a zebra"}, &w);
    EXPECT_TRUE(w.empty());
    const auto body = nlohmann::json::parse(h.transport->calls()[0].body);
    EXPECT_EQ(body["messages"][0]["content"], std::string(system_template(kEditTemplateId)));
    const std::string user = body["messages"][1]["content"][0]["text"];
    EXPECT_NE(user.find("make the horse a zebra"), std::string::npos);
    EXPECT_NE(user.find(serialize_graph(source, GraphFormat::json)), std::string::npos);
  }
  {
    Harness h({ok(rewritten)});
    Warnings w;
    h.client.auto_edit_graph({sample_image(), source, "make the horse a zebra"}, &w);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find("0%"), std::string::npos);
  }
  Harness h({ok(aligned)});
  EXPECT_THROW(h.client.auto_edit_graph({sample_image(), source, "   "}), ValidationError);
}

TEST(Helpers, AlignmentRatio) {
  const auto a = parse_graph_dsl("a -[on]-> b\nc -[on]-> d\n");
  const auto b = parse_graph_dsl("a -[on]-> b\nx -[on]-> y\n");
  EXPECT_DOUBLE_EQ(alignment_ratio(a, b), 0.5);
  EXPECT_DOUBLE_EQ(alignment_ratio(SceneGraph{}, b), 1.0);
}

TEST(FixtureKey, LogicalRequestOnly) {
  const auto img = sample_image();
  const ExtractionRequest r{img};
  EXPECT_EQ(fixture_key(r), fixture_key(ExtractionRequest{img}));
  EXPECT_EQ(fixture_key(r).size(), 64u);
  EXPECT_NE(fixture_key(r), fixture_key(r, true));
  EXPECT_NE(fixture_key(r), fixture_key(ExtractionRequest{ImagePayload::from_bytes(encode_png(testing::pattern_image(9, 8)))}));
  const auto g = parse_graph_dsl("dog -[on]-> bench\n");
  EXPECT_EQ(fixture_key(AutoEditRequest{img, g, "Make it  a CAT"}), fixture_key(AutoEditRequest{img, g, "make it a cat"}));
  EXPECT_NE(fixture_key(AutoEditRequest{img, g, "make it a cat"}), fixture_key(AutoEditRequest{img, g, "make it a cow"}));
}

TEST(Fixtures, LookupOrder) {
  testing::TempDir dir;
  EndpointConfig config;
  config.fixtures_dir = dir.path();
  const Client client(config);
  const ExtractionRequest req{sample_image()};
  EXPECT_THROW(client.extract_scene_graph(req), EndpointError);

  write_file(dir / "scene.json", kDogBench);
  write_file(dir / "index.json", nlohmann::json{{fixture_key(req), "scene.json"}}.dump());
  EXPECT_EQ(client.extract_scene_graph(req).size(), 1u);

  write_file(dir / (fixture_key(req) + ".txt"), "prose first");
  write_file(dir / (fixture_key(req, true) + ".txt"), many_relations(2));
  EXPECT_EQ(client.extract_scene_graph(req).size(), 2u);
}

TEST(Fixtures, CommittedDogBench) {
  EndpointConfig config;
  config.fixtures_dir = testing::fixture_path("mllm");
  const Client client(config);
  const auto img = ImagePayload::from_bytes(read_file(testing::fixture_path("images/dog_bench.png")));
  const auto g = client.extract_scene_graph({img});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.keys()[0].phrase(), "dog sitting on bench");
}

TEST(Socket, ServerErrorsAreRetried) {
  auto server = testing::chat_server([](int) { return testing::Reply{503, "busy"}; });
  auto config = endpoint();
  config.base_url = server->url();
  config.backoff_s = 0.0;
  config.max_retries = 2;
  const Client client(config);
  EXPECT_THROW(client.extract_scene_graph({sample_image()}), EndpointError);
  EXPECT_EQ(server->hits(), 3);
}

TEST(Socket, ProseThenJson) {
  auto server = testing::chat_server([](int attempt) {
    return testing::Reply{200, chat_envelope(attempt == 1 ? "Here you go!" : kDogBench)};
  });
  auto config = endpoint();
  config.base_url = server->url();
  const Client client(config);
  EXPECT_EQ(client.extract_scene_graph({sample_image()}).size(), 1u);
  EXPECT_EQ(server->hits(), 2);
}

TEST(Socket, UnreachableEndpoint) {
  auto config = endpoint();
  config.base_url = "http://127.0.0.1:1";
  config.backoff_s = 0.0;
  config.max_retries = 1;
  config.timeout_s = 2;
  const Client client(config);
  try {
    client.extract_scene_graph({sample_image()});
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

}  // namespace
}  // namespace venus::mllm
