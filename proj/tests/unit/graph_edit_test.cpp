#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "venus/error.hpp"
#include "venus/graph_edit.hpp"
#include "venus/image.hpp"

namespace venus {
namespace {

using testing::Triple;

SceneGraph horse() { return parse_graph_json(read_file(testing::fixture_path("graphs/horse.json"))); }
SceneGraph zebra() { return parse_graph_json(read_file(testing::fixture_path("graphs/zebra.json"))); }

std::vector<Triple> as_triples(const SceneGraph& g, const std::vector<RelationTriplet>& rels) {
  std::vector<Triple> out;
  for (const auto& r : rels) out.emplace_back(g.phrase(r.subject_id), r.predicate, g.phrase(r.object_id));
  return out;
}

std::vector<Triple> as_triples(const std::vector<TripletText>& ts) {
  std::vector<Triple> out;
  for (const auto& t : ts) out.emplace_back(t.subject, t.predicate, t.object);
  return out;
}

TEST(Split, HorseToZebra) {
  const auto split = split_graphs(horse(), zebra());
  const auto z = zebra();
  EXPECT_EQ(as_triples(z, split.new_relations), (std::vector<Triple>{{"zebra", "standing on", "field"}}));
  EXPECT_EQ(as_triples(z, split.bgd_relations), (std::vector<Triple>{{"sky", "above", "field"}}));
}

TEST(Split, IdenticalGraphsHaveNoNewContent) {
  const auto split = split_graphs(horse(), horse());
  EXPECT_TRUE(split.new_relations.empty());
  EXPECT_EQ(split.bgd_relations.size(), horse().size());
  EXPECT_TRUE(compute_delta(horse(), horse()).empty());
}

TEST(Delta, MoonRemoval) {
  const auto a = parse_graph_dsl(read_file(testing::fixture_path("graphs/moon_sky.dsl")));
  const auto b = parse_graph_dsl(read_file(testing::fixture_path("graphs/moon_removed.dsl")));
  const auto d = compute_delta(a, b);
  EXPECT_TRUE(d.added.empty());
  EXPECT_EQ(as_triples(d.removed), (std::vector<Triple>{{"moon", "hanging in", "dark sky"}}));
}

TEST(Split, MatchesBruteForceOracle) {
  testing::Rng rng(101);
  for (int i = 0; i < 400; ++i) {
    const auto [src, tgt] = testing::random_graph_pair(rng);
    const auto oracle = testing::oracle_split(src, tgt);
    const auto split = split_graphs(src, tgt);
    ASSERT_EQ(as_triples(tgt, split.new_relations), oracle.new_triples);
    ASSERT_EQ(as_triples(tgt, split.bgd_relations), oracle.bgd_triples);
    const auto delta = compute_delta(src, tgt);
    ASSERT_EQ(as_triples(delta.added), oracle.new_triples);
    ASSERT_EQ(as_triples(delta.removed), oracle.removed);
  }
}

TEST(Delta, ApplyReconstructsTarget) {
  testing::Rng rng(202);
  for (int i = 0; i < 400; ++i) {
    const auto [src, tgt] = testing::random_graph_pair(rng);
    const auto rebuilt = apply_delta(src, compute_delta(src, tgt));
    ASSERT_EQ(testing::oracle_set(rebuilt), testing::oracle_set(tgt));
  }
}

TEST(Delta, IdenticalPhrasesBothEnds) {
  const auto src = SceneGraph::create({{"a", "dog", {}}}, {});
  const auto tgt = SceneGraph::create({{"a", "dog", {}}, {"b", "dog", {}}}, {{"a", "next to", "b"}});
  const auto rebuilt = apply_delta(src, compute_delta(src, tgt));
  EXPECT_EQ(testing::oracle_set(rebuilt), testing::oracle_set(tgt));
}

TEST(Delta, JsonRoundTrip) {
  const GraphDelta d{{{"zebra", "standing on", "field"}}, {{"brown horse", "standing on", "field"}}};
  const auto back = delta_from_json(nlohmann::json::parse(delta_to_json(d).dump()));
  EXPECT_EQ(back.added, d.added);
  EXPECT_EQ(back.removed, d.removed);
  EXPECT_THROW(delta_from_json(nlohmann::json::parse(R"({"added":[{"subject":"a"}]})")), ValidationError);
}

TEST(Edits, HorseToZebraOpsFixture) {
  const auto ops = edit_ops_from_json(nlohmann::json::parse(read_file(testing::fixture_path("graphs/horse_to_zebra.ops.json"))));
  ASSERT_EQ(ops.size(), 2u);
  const auto out = apply_edits(horse(), ops);
  EXPECT_EQ(testing::oracle_set(out), testing::oracle_set(zebra()));
}

TEST(Edits, AddRemoveRelation) {
  const auto g = horse();
  std::vector<GraphEditOp> ops = {
      edit_ops::AddRelation{{"", "man", {"Old"}}, "riding", {"", "horse", {}}},
      edit_ops::RemoveRelation{{"", "sky", {}}, "above", {"", "field", {}}},
  };
  const auto out = apply_edits(g, ops);
  const auto triples = testing::oracle_set(out);
  EXPECT_TRUE(triples.contains({"old man", "riding", "brown horse"}));
  EXPECT_FALSE(triples.contains({"sky", "above", "field"}));
  EXPECT_EQ(out.size(), 2u);
}

TEST(Edits, RemoveNodeDropsIncidentRelations) {
  std::vector<GraphEditOp> ops = {edit_ops::RemoveNode{{"", "field", {}}}};
  const auto out = apply_edits(horse(), ops);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(out.find("field"), nullptr);
}

TEST(Edits, ErrorsNameTheOp) {
  const auto g = horse();
  std::vector<GraphEditOp> ops = {edit_ops::SetAttributes{{"", "sky", {}}, {"blue"}},
                                  edit_ops::ReplaceNodeName{{"", "unicorn", {}}, "zebra"}};
  try {
    apply_edits(g, ops);
    FAIL();
  } catch (const EditError& e) {
    EXPECT_EQ(e.op_index(), 1u);
    EXPECT_NE(std::string(e.what()).find("unicorn"), std::string::npos);
  }
  std::vector<GraphEditOp> rm = {edit_ops::RemoveRelation{{"", "sky", {}}, "below", {"", "field", {}}}};
  EXPECT_THROW(apply_edits(g, rm), EditError);
  std::vector<GraphEditOp> self = {edit_ops::AddRelation{{"", "sky", {}}, "near", {"", "sky", {}}}};
  EXPECT_THROW(apply_edits(g, self), EditError);
  std::vector<GraphEditOp> empty_name = {edit_ops::ReplaceNodeName{{"", "sky", {}}, "  "}};
  EXPECT_THROW(apply_edits(g, empty_name), EditError);
}

TEST(Edits, AmbiguousNameSelector) {
  const auto g = SceneGraph::create({{"a", "dog", {}}, {"b", "dog", {}}, {"c", "bench", {}}}, {{"a", "on", "c"}});
  std::vector<GraphEditOp> by_name = {edit_ops::ReplaceNodeName{{"", "dog", {}}, "cat"}};
  EXPECT_THROW(apply_edits(g, by_name), EditError);
  std::vector<GraphEditOp> by_id = {edit_ops::ReplaceNodeName{{"b", "", {}}, "cat"}};
  EXPECT_EQ(apply_edits(g, by_id).node("b").name, "cat");
}

TEST(Edits, JsonRoundTrip) {
  std::vector<GraphEditOp> ops = {
      edit_ops::AddRelation{{"", "man", {"old"}}, "riding", {"h", "", {}}},
      edit_ops::RemoveRelation{{"", "sky", {}}, "above", {"", "field", {}}},
      edit_ops::ReplaceNodeName{{"", "horse", {}}, "zebra"},
      edit_ops::SetAttributes{{"", "zebra", {}}, {}},
      edit_ops::RemoveNode{{"", "sky", {}}},
  };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& op : ops) arr.push_back(nlohmann::json::parse(edit_op_to_json(op).dump()));
  const auto back = edit_ops_from_json(arr);
  ASSERT_EQ(back.size(), ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) EXPECT_EQ(edit_op_to_json(back[i]), edit_op_to_json(ops[i]));
  EXPECT_THROW(edit_op_from_json(nlohmann::json::parse(R"({"op":"teleport"})")), ValidationError);
  EXPECT_THROW(edit_ops_from_json(nlohmann::json::parse(R"({"steps":[]})")), ValidationError);
}

}  // namespace
}  // namespace venus
