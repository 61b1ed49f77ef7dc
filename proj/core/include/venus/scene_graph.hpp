#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace venus {

using Warnings = std::vector<std::string>;

struct ObjectNode {
  std::string id;
  std::string name;
  std::vector<std::string> attributes;

  friend bool operator==(const ObjectNode&, const ObjectNode&) = default;
};

struct RelationTriplet {
  std::string subject_id;
  std::string predicate;
  std::string object_id;

  friend bool operator==(const RelationTriplet&, const RelationTriplet&) = default;
};

/// Identity of a relation across independently produced graphs: the rendered
/// canonical text of subject phrase, predicate and object phrase. Node ids do
/// not participate.
struct CanonicalKey {
  std::string subject_text;
  std::string predicate_text;
  std::string object_text;

  friend auto operator<=>(const CanonicalKey&, const CanonicalKey&) = default;
  friend bool operator==(const CanonicalKey&, const CanonicalKey&) = default;

  /// Rendered "subject predicate object", as used in prompts.
  std::string phrase() const;
};

struct CanonicalKeyHash {
  std::size_t operator()(const CanonicalKey& k) const noexcept;
};

/// "large horse": attributes in order, then the name.
std::string render_node_phrase(const ObjectNode& node);

struct ParseOptions {
  /// Strict mode rejects unknown JSON fields, duplicate relations and empty
  /// attributes instead of dropping them with a warning.
  bool strict = false;
};

/// A validated, canonicalized scene graph. Immutable after construction.
///
/// Invariants: node ids are unique and non-empty, names and predicates are
/// non-empty canonical text, every relation references existing nodes, no
/// relation is a self-relation, and no two relations share a CanonicalKey.
/// Relation order is first-appearance order; orphan nodes are allowed.
class SceneGraph {
 public:
  SceneGraph() = default;

  /// Canonicalizes and validates. Throws ValidationError.
  static SceneGraph create(std::vector<ObjectNode> objects, std::vector<RelationTriplet> relations,
                           const ParseOptions& options = {}, Warnings* warnings = nullptr);

  std::span<const ObjectNode> objects() const { return objects_; }
  std::span<const RelationTriplet> relations() const { return relations_; }
  std::span<const CanonicalKey> keys() const { return keys_; }

  /// Number of relation triplets.
  std::size_t size() const { return relations_.size(); }
  bool empty() const { return relations_.empty(); }

  const ObjectNode* find(std::string_view id) const;
  /// Throws ValidationError when `id` is not a node of this graph.
  const ObjectNode& node(std::string_view id) const;
  std::string phrase(std::string_view id) const { return render_node_phrase(node(id)); }

  CanonicalKey key(const RelationTriplet& relation) const;
  bool contains(const CanonicalKey& key) const { return key_index_.contains(key); }

 private:
  std::vector<ObjectNode> objects_;
  std::vector<RelationTriplet> relations_;
  std::vector<CanonicalKey> keys_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::unordered_map<CanonicalKey, std::size_t, CanonicalKeyHash> key_index_;
};

/// Same canonical relation key set and same multiset of (name, attributes)
/// nodes. Ids and relation order are ignored.
bool semantically_equal(const SceneGraph& a, const SceneGraph& b);

enum class GraphFormat { json, dsl };

/// Picks json when the first non-blank character is '{', dsl otherwise.
GraphFormat sniff_graph_format(std::string_view text);

SceneGraph parse_graph_json(std::string_view bytes, const ParseOptions& options = {},
                            Warnings* warnings = nullptr);
SceneGraph graph_from_json(const nlohmann::json& doc, const ParseOptions& options = {},
                           Warnings* warnings = nullptr);

/// Line-oriented form, one triplet per line:
///
///     dog(brown) -[sitting on]-> bench   # comment
///
/// Node ids are assigned o1, o2, ... by first appearance. Two extensions keep
/// the format lossless: a line holding a lone phrase declares an orphan node,
/// and a phrase may carry an explicit id (`dog@o7`) to separate nodes that
/// render identically.
SceneGraph parse_graph_dsl(std::string_view text, const ParseOptions& options = {},
                           Warnings* warnings = nullptr);

SceneGraph parse_graph(std::string_view text, GraphFormat format, const ParseOptions& options = {},
                       Warnings* warnings = nullptr);

nlohmann::ordered_json graph_to_json(const SceneGraph& graph);

/// Byte-deterministic. JSON output is compact with fixed key order.
std::string serialize_graph(const SceneGraph& graph, GraphFormat format);

/// Decodes the first balanced JSON object found in free-form model output
/// (prose and code fences are skipped) in non-strict mode. Throws
/// ExtractionError when no JSON object is present.
SceneGraph extract_graph_from_model_text(std::string_view text, Warnings* warnings = nullptr);

}  // namespace venus
