#include "venus/graph_edit.hpp"

#include <algorithm>
#include <unordered_set>

#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string NodeSelector::describe() const {
  if (!id.empty()) return "id \"" + id + "\"";
  return "name \"" + canonicalize_text(name) + "\"";
}

namespace {

// Mutable working copy used while applying a sequence of edits.
class Workspace {
 public:
  explicit Workspace(const SceneGraph& g)
      : objects_(g.objects().begin(), g.objects().end()), relations_(g.relations().begin(), g.relations().end()) {}

  // Index of the selected node, or npos when absent. Throws on ambiguity.
  std::size_t lookup(const NodeSelector& sel, std::size_t op) const {
    if (!sel.id.empty()) {
      for (std::size_t i = 0; i < objects_.size(); ++i) {
        if (objects_[i].id == sel.id) return i;
      }
      return npos;
    }
    const auto name = canonicalize_text(sel.name);
    if (name.empty()) throw EditError(op, "node selector has neither id nor name");
    std::size_t found = npos;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (objects_[i].name != name) continue;
      if (found != npos) throw EditError(op, "ambiguous selector " + sel.describe());
      found = i;
    }
    return found;
  }

  std::size_t require(const NodeSelector& sel, std::size_t op) const {
    auto i = lookup(sel, op);
    if (i == npos) throw EditError(op, "no node matches " + sel.describe());
    return i;
  }

  std::size_t lookup_or_create(const NodeSelector& sel, std::size_t op) {
    if (auto i = lookup(sel, op); i != npos) return i;
    const auto name = canonicalize_text(sel.name);
    if (name.empty()) throw EditError(op, "cannot create node for " + sel.describe() + " without a name");
    std::string id = sel.id.empty() ? fresh_id() : sel.id;
    objects_.push_back({std::move(id), name, canonical_attributes(sel.attributes)});
    return objects_.size() - 1;
  }

  void apply(const edit_ops::AddRelation& op, std::size_t index) {
    const auto predicate = canonicalize_text(op.predicate);
    if (predicate.empty()) throw EditError(index, "empty predicate");
    const auto s = lookup_or_create(op.subject, index);
    const auto o = lookup_or_create(op.object, index);
    if (s == o) throw EditError(index, "self-relation on " + op.subject.describe());
    relations_.push_back({objects_[s].id, predicate, objects_[o].id});
  }

  void apply(const edit_ops::RemoveRelation& op, std::size_t index) {
    const auto& s = objects_[require(op.subject, index)].id;
    const auto& o = objects_[require(op.object, index)].id;
    const auto predicate = canonicalize_text(op.predicate);
    auto it = std::find_if(relations_.begin(), relations_.end(), [&](const RelationTriplet& r) {
      return r.subject_id == s && r.object_id == o && r.predicate == predicate;
    });
    if (it == relations_.end()) {
      throw EditError(index, "no relation (" + op.subject.describe() + ", " + predicate + ", " +
                                 op.object.describe() + ")");
    }
    relations_.erase(it);
  }

  void apply(const edit_ops::ReplaceNodeName& op, std::size_t index) {
    auto name = canonicalize_text(op.new_name);
    if (name.empty()) throw EditError(index, "replacement name for " + op.node.describe() + " is empty");
    objects_[require(op.node, index)].name = std::move(name);
  }

  void apply(const edit_ops::SetAttributes& op, std::size_t index) {
    objects_[require(op.node, index)].attributes = canonical_attributes(op.attributes);
  }

  void apply(const edit_ops::RemoveNode& op, std::size_t index) {
    const auto i = require(op.node, index);
    const auto id = objects_[i].id;
    objects_.erase(objects_.begin() + static_cast<std::ptrdiff_t>(i));
    std::erase_if(relations_, [&](const RelationTriplet& r) { return r.subject_id == id || r.object_id == id; });
  }

  SceneGraph finish(Warnings* warnings) && {
    return SceneGraph::create(std::move(objects_), std::move(relations_), {}, warnings);
  }

  std::vector<ObjectNode>& objects() { return objects_; }
  std::vector<RelationTriplet>& relations() { return relations_; }

  std::string fresh_id() const {
    std::unordered_set<std::string> taken;
    for (const auto& o : objects_) taken.insert(o.id);
    for (std::size_t n = objects_.size() + 1;; ++n) {
      auto id = "o" + std::to_string(n);
      if (!taken.contains(id)) return id;
    }
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  static std::vector<std::string> canonical_attributes(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& a : raw) {
      auto c = canonicalize_text(a);
      if (!c.empty()) out.push_back(std::move(c));
    }
    return out;
  }

  std::vector<ObjectNode> objects_;
  std::vector<RelationTriplet> relations_;
};

}  // namespace

SceneGraph apply_edits(const SceneGraph& graph, std::span<const GraphEditOp> ops, Warnings* warnings) {
  Workspace ws(graph);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    std::visit([&](const auto& op) { ws.apply(op, i); }, ops[i]);
  }
  return std::move(ws).finish(warnings);
}

TripletText to_text(const CanonicalKey& key) { return {key.subject_text, key.predicate_text, key.object_text}; }

GraphSplit split_graphs(const SceneGraph& source, const SceneGraph& target) {
  GraphSplit split;
  const auto rels = target.relations();
  const auto keys = target.keys();
  for (std::size_t i = 0; i < rels.size(); ++i) {
    (source.contains(keys[i]) ? split.bgd_relations : split.new_relations).push_back(rels[i]);
  }
  return split;
}

GraphDelta compute_delta(const SceneGraph& source, const SceneGraph& target) {
  GraphDelta delta;
  for (const auto& k : target.keys()) {
    if (!source.contains(k)) delta.added.push_back(to_text(k));
  }
  for (const auto& k : source.keys()) {
    if (!target.contains(k)) delta.removed.push_back(to_text(k));
  }
  return delta;
}

SceneGraph apply_delta(const SceneGraph& graph, const GraphDelta& delta) {
  Workspace ws(graph);
  std::unordered_set<CanonicalKey, CanonicalKeyHash> removed;
  for (const auto& t : delta.removed) removed.insert(t.key());

  auto& objects = ws.objects();
  auto& relations = ws.relations();
  std::vector<RelationTriplet> kept;
  {
    const auto keys = graph.keys();
    const auto rels = graph.relations();
    for (std::size_t i = 0; i < rels.size(); ++i) {
      if (!removed.contains(keys[i])) kept.push_back(rels[i]);
    }
  }
  relations = std::move(kept);

  // `avoid` keeps "dog next to dog" from collapsing onto a single node.
  auto node_for = [&](const std::string& phrase, const std::string& avoid) -> std::string {
    const auto canon = canonicalize_text(phrase);
    for (const auto& o : objects) {
      if (o.id != avoid && render_node_phrase(o) == canon) return o.id;
    }
    auto id = ws.fresh_id();
    objects.push_back({id, canon, {}});
    return id;
  };
  for (const auto& t : delta.added) {
    auto s = node_for(t.subject, "");
    auto o = node_for(t.object, s);
    relations.push_back({s, t.predicate, o});
  }
  return std::move(ws).finish(nullptr);
}

// ---------------------------------------------------------------------------
// JSON encodings

namespace {

ordered_json triplet_json(const TripletText& t) {
  ordered_json o;
  o["subject"] = t.subject;
  o["predicate"] = t.predicate;
  o["object"] = t.object;
  return o;
}

std::string string_field(const json& doc, const char* field, const std::string& where) {
  auto it = doc.find(field);
  if (it == doc.end() || !it->is_string()) {
    throw ValidationError(where + " requires string field \"" + field + "\"");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& doc, const char* field, const std::string& where) {
  std::vector<std::string> out;
  auto it = doc.find(field);
  if (it == doc.end() || it->is_null()) return out;
  if (!it->is_array()) throw ValidationError(where + " field \"" + field + "\" must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ValidationError(where + " field \"" + field + "\" must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

ordered_json selector_json(const NodeSelector& sel) {
  if (sel.id.empty() && sel.attributes.empty()) return sel.name;
  ordered_json o;
  if (!sel.id.empty()) o["id"] = sel.id;
  if (!sel.name.empty()) o["name"] = sel.name;
  if (!sel.attributes.empty()) o["attributes"] = sel.attributes;
  return o;
}

NodeSelector selector_from(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) throw ValidationError(std::string("edit op is missing \"") + field + "\"");
  if (it->is_string()) return {"", it->get<std::string>(), {}};
  if (!it->is_object()) throw ValidationError(std::string("selector \"") + field + "\" must be a string or object");
  NodeSelector sel;
  if (auto id = it->find("id"); id != it->end()) sel.id = id->get<std::string>();
  if (auto name = it->find("name"); name != it->end()) sel.name = name->get<std::string>();
  sel.attributes = string_list(*it, "attributes", "selector");
  if (sel.id.empty() && sel.name.empty()) {
    throw ValidationError(std::string("selector \"") + field + "\" needs an id or a name");
  }
  return sel;
}

}  // namespace

ordered_json delta_to_json(const GraphDelta& delta) {
  ordered_json doc;
  doc["added"] = ordered_json::array();
  doc["removed"] = ordered_json::array();
  for (const auto& t : delta.added) doc["added"].push_back(triplet_json(t));
  for (const auto& t : delta.removed) doc["removed"].push_back(triplet_json(t));
  return doc;
}

GraphDelta delta_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("delta must be a JSON object");
  GraphDelta delta;
  auto read = [&](const char* field, std::vector<TripletText>& out) {
    auto it = doc.find(field);
    if (it == doc.end()) return;
    if (!it->is_array()) throw ValidationError(std::string("delta field \"") + field + "\" must be an array");
    for (const auto& t : *it) {
      out.push_back({canonicalize_text(string_field(t, "subject", "delta triplet")),
                     canonicalize_text(string_field(t, "predicate", "delta triplet")),
                     canonicalize_text(string_field(t, "object", "delta triplet"))});
    }
  };
  read("added", delta.added);
  read("removed", delta.removed);
  return delta;
}

ordered_json edit_op_to_json(const GraphEditOp& op) {
  ordered_json o;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, edit_ops::AddRelation> || std::is_same_v<T, edit_ops::RemoveRelation>) {
          o["op"] = std::is_same_v<T, edit_ops::AddRelation> ? "add_relation" : "remove_relation";
          o["subject"] = selector_json(v.subject);
          o["predicate"] = v.predicate;
          o["object"] = selector_json(v.object);
        } else if constexpr (std::is_same_v<T, edit_ops::ReplaceNodeName>) {
          o["op"] = "replace_node_name";
          o["node"] = selector_json(v.node);
          o["name"] = v.new_name;
        } else if constexpr (std::is_same_v<T, edit_ops::SetAttributes>) {
          o["op"] = "set_attributes";
          o["node"] = selector_json(v.node);
          o["attributes"] = v.attributes;
        } else {
          o["op"] = "remove_node";
          o["node"] = selector_json(v.node);
        }
      },
      op);
  return o;
}

GraphEditOp edit_op_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("edit op must be a JSON object");
  const auto kind = string_field(doc, "op", "edit op");
  if (kind == "add_relation") {
    return edit_ops::AddRelation{selector_from(doc, "subject"), string_field(doc, "predicate", kind),
                                 selector_from(doc, "object")};
  }
  if (kind == "remove_relation") {
    return edit_ops::RemoveRelation{selector_from(doc, "subject"), string_field(doc, "predicate", kind),
                                    selector_from(doc, "object")};
  }
  if (kind == "replace_node_name") {
    return edit_ops::ReplaceNodeName{selector_from(doc, "node"), string_field(doc, "name", kind)};
  }
  if (kind == "set_attributes") {
    return edit_ops::SetAttributes{selector_from(doc, "node"), string_list(doc, "attributes", kind)};
  }
  if (kind == "remove_node") return edit_ops::RemoveNode{selector_from(doc, "node")};
  throw ValidationError("unknown edit op \"" + kind + "\"");
}

std::vector<GraphEditOp> edit_ops_from_json(const json& doc) {
  const json* arr = &doc;
  if (doc.is_object()) {
    auto it = doc.find("ops");
    if (it == doc.end()) throw ValidationError("edit ops document needs an \"ops\" array");
    arr = &*it;
  }
  if (!arr->is_array()) throw ValidationError("edit ops must be a JSON array");
  std::vector<GraphEditOp> ops;
  for (const auto& o : *arr) ops.push_back(edit_op_from_json(o));
  return ops;
}

}  // namespace venus
