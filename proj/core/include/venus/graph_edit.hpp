#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "venus/scene_graph.hpp"

namespace venus {

/// Picks a node by id when `id` is set, otherwise by canonical name. A name
/// matching more than one node is an error. `attributes` only matter when an
/// add_relation creates a node that does not exist yet.
struct NodeSelector {
  std::string id;
  std::string name;
  std::vector<std::string> attributes;

  std::string describe() const;
};

namespace edit_ops {

struct AddRelation {
  NodeSelector subject;
  std::string predicate;
  NodeSelector object;
};
struct RemoveRelation {
  NodeSelector subject;
  std::string predicate;
  NodeSelector object;
};
struct ReplaceNodeName {
  NodeSelector node;
  std::string new_name;
};
struct SetAttributes {
  NodeSelector node;
  std::vector<std::string> attributes;
};
struct RemoveNode {
  NodeSelector node;
};

}  // namespace edit_ops

using GraphEditOp = std::variant<edit_ops::AddRelation, edit_ops::RemoveRelation, edit_ops::ReplaceNodeName,
                                 edit_ops::SetAttributes, edit_ops::RemoveNode>;

/// Applies `ops` left to right. Throws EditError naming the op index.
SceneGraph apply_edits(const SceneGraph& graph, std::span<const GraphEditOp> ops, Warnings* warnings = nullptr);

/// A relation in rendered-text form, as carried by deltas.
struct TripletText {
  std::string subject;
  std::string predicate;
  std::string object;

  CanonicalKey key() const { return {subject, predicate, object}; }
  friend bool operator==(const TripletText&, const TripletText&) = default;
};

TripletText to_text(const CanonicalKey& key);

/// added = target \ source, removed = source \ target, each in the order the
/// relations appear in their own graph.
struct GraphDelta {
  std::vector<TripletText> added;
  std::vector<TripletText> removed;

  bool empty() const { return added.empty() && removed.empty(); }
};

/// new_relations = G' \ G and bgd_relations = G ∩ G' (CanonicalKey set
/// algebra), both in target relation order. Triplets index into the target.
struct GraphSplit {
  std::vector<RelationTriplet> new_relations;
  std::vector<RelationTriplet> bgd_relations;
};

GraphSplit split_graphs(const SceneGraph& source, const SceneGraph& target);
GraphDelta compute_delta(const SceneGraph& source, const SceneGraph& target);

/// Removes `removed` and appends `added`, reusing nodes whose rendered phrase
/// matches and creating new ones otherwise.
SceneGraph apply_delta(const SceneGraph& graph, const GraphDelta& delta);

nlohmann::ordered_json delta_to_json(const GraphDelta& delta);
GraphDelta delta_from_json(const nlohmann::json& doc);

nlohmann::ordered_json edit_op_to_json(const GraphEditOp& op);
GraphEditOp edit_op_from_json(const nlohmann::json& doc);
/// Accepts either a bare array of ops or {"ops": [...]}.
std::vector<GraphEditOp> edit_ops_from_json(const nlohmann::json& doc);

}  // namespace venus
