#include "venus/scene_graph.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>

#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string CanonicalKey::phrase() const {
  return subject_text + " " + predicate_text + " " + object_text;
}

std::size_t CanonicalKeyHash::operator()(const CanonicalKey& k) const noexcept {
  std::uint64_t h = fnv1a64(k.subject_text);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(k.predicate_text, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(k.object_text, h);
  return static_cast<std::size_t>(h);
}

std::string render_node_phrase(const ObjectNode& node) {
  std::string out;
  for (const auto& attr : node.attributes) {
    out += attr;
    out += ' ';
  }
  out += node.name;
  return out;
}

// ---------------------------------------------------------------------------
// SceneGraph

SceneGraph SceneGraph::create(std::vector<ObjectNode> objects, std::vector<RelationTriplet> relations,
                              const ParseOptions& options, Warnings* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };

  SceneGraph g;
  g.objects_.reserve(objects.size());
  for (auto& obj : objects) {
    if (obj.id.empty()) throw ValidationError("object with empty id");
    if (g.node_index_.contains(obj.id)) throw ValidationError("duplicate object id \"" + obj.id + "\"");
    obj.name = canonicalize_text(obj.name);
    if (obj.name.empty()) throw ValidationError("object \"" + obj.id + "\" has an empty name");
    std::vector<std::string> attrs;
    attrs.reserve(obj.attributes.size());
    for (const auto& raw : obj.attributes) {
      auto attr = canonicalize_text(raw);
      if (attr.empty()) {
        if (options.strict) throw ValidationError("object \"" + obj.id + "\" has an empty attribute");
        warn("dropped empty attribute on object \"" + obj.id + "\"");
        continue;
      }
      attrs.push_back(std::move(attr));
    }
    obj.attributes = std::move(attrs);
    g.node_index_.emplace(obj.id, g.objects_.size());
    g.objects_.push_back(std::move(obj));
  }

  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto& rel = relations[i];
    const auto where = "relation #" + std::to_string(i);
    if (!g.node_index_.contains(rel.subject_id)) {
      throw ValidationError(where + " references unknown subject id \"" + rel.subject_id + "\"");
    }
    if (!g.node_index_.contains(rel.object_id)) {
      throw ValidationError(where + " references unknown object id \"" + rel.object_id + "\"");
    }
    if (rel.subject_id == rel.object_id) {
      throw ValidationError(where + " is a self-relation on \"" + rel.subject_id + "\"");
    }
    rel.predicate = canonicalize_text(rel.predicate);
    if (rel.predicate.empty()) throw ValidationError(where + " has an empty predicate");

    auto key = g.key(rel);
    if (g.key_index_.contains(key)) {
      if (options.strict) throw ValidationError(where + " duplicates \"" + key.phrase() + "\"");
      warn("dropped duplicate relation \"" + key.phrase() + "\"");
      continue;
    }
    g.key_index_.emplace(key, g.relations_.size());
    g.keys_.push_back(std::move(key));
    g.relations_.push_back(std::move(rel));
  }
  return g;
}

const ObjectNode* SceneGraph::find(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  return it == node_index_.end() ? nullptr : &objects_[it->second];
}

const ObjectNode& SceneGraph::node(std::string_view id) const {
  if (const auto* n = find(id)) return *n;
  throw ValidationError("unknown node id \"" + std::string(id) + "\"");
}

CanonicalKey SceneGraph::key(const RelationTriplet& relation) const {
  return {phrase(relation.subject_id), relation.predicate, phrase(relation.object_id)};
}

bool semantically_equal(const SceneGraph& a, const SceneGraph& b) {
  if (a.size() != b.size() || a.objects().size() != b.objects().size()) return false;
  for (const auto& k : a.keys()) {
    if (!b.contains(k)) return false;
  }
  using NodeValue = std::pair<std::string, std::vector<std::string>>;
  auto nodes = [](const SceneGraph& g) {
    std::multiset<NodeValue> out;
    for (const auto& n : g.objects()) out.emplace(n.name, n.attributes);
    return out;
  };
  return nodes(a) == nodes(b);
}

GraphFormat sniff_graph_format(std::string_view text) {
  for (unsigned char c : text) {
    if (std::isspace(c)) continue;
    return c == '{' ? GraphFormat::json : GraphFormat::dsl;
  }
  return GraphFormat::dsl;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string require_string(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ValidationError(where + " is missing \"" + field + "\"");
  if (!it->is_string()) throw ValidationError(where + " field \"" + field + "\" must be a string");
  return it->get<std::string>();
}

void check_fields(const json& obj, std::initializer_list<const char*> allowed, const std::string& where,
                  const ParseOptions& options, Warnings* warnings) {
  for (const auto& [k, _] : obj.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
    if (known) continue;
    if (options.strict) throw ValidationError(where + " has unknown field \"" + k + "\"");
    if (warnings) warnings->push_back("ignored unknown field \"" + k + "\" in " + where);
  }
}

const json* optional_array(const json& doc, const char* field, const ParseOptions& options) {
  auto it = doc.find(field);
  if (it == doc.end()) {
    if (options.strict) throw ValidationError(std::string("graph is missing \"") + field + "\"");
    return nullptr;
  }
  if (!it->is_array()) throw ValidationError(std::string("\"") + field + "\" must be an array");
  return &*it;
}

}  // namespace

SceneGraph graph_from_json(const json& doc, const ParseOptions& options, Warnings* warnings) {
  if (!doc.is_object()) throw ValidationError("scene graph must be a JSON object");
  check_fields(doc, {"objects", "relations"}, "graph", options, warnings);

  std::vector<ObjectNode> objects;
  if (const auto* arr = optional_array(doc, "objects", options)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& o = (*arr)[i];
      const auto where = "objects[" + std::to_string(i) + "]";
      if (!o.is_object()) throw ValidationError(where + " must be an object");
      check_fields(o, {"id", "name", "attributes"}, where, options, warnings);
      ObjectNode node{require_string(o, "id", where), require_string(o, "name", where), {}};
      if (auto it = o.find("attributes"); it != o.end() && !it->is_null()) {
        if (!it->is_array()) throw ValidationError(where + " field \"attributes\" must be an array");
        for (const auto& a : *it) {
          if (!a.is_string()) throw ValidationError(where + " attributes must be strings");
          node.attributes.push_back(a.get<std::string>());
        }
      }
      objects.push_back(std::move(node));
    }
  }

  std::vector<RelationTriplet> relations;
  if (const auto* arr = optional_array(doc, "relations", options)) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& r = (*arr)[i];
      const auto where = "relations[" + std::to_string(i) + "]";
      if (!r.is_object()) throw ValidationError(where + " must be an object");
      check_fields(r, {"subject_id", "predicate", "object_id"}, where, options, warnings);
      relations.push_back({require_string(r, "subject_id", where), require_string(r, "predicate", where),
                           require_string(r, "object_id", where)});
    }
  }
  return SceneGraph::create(std::move(objects), std::move(relations), options, warnings);
}

SceneGraph parse_graph_json(std::string_view bytes, const ParseOptions& options, Warnings* warnings) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(), e.byte);
  }
  return graph_from_json(doc, options, warnings);
}

ordered_json graph_to_json(const SceneGraph& graph) {
  ordered_json objects = ordered_json::array();
  for (const auto& n : graph.objects()) {
    ordered_json o;
    o["id"] = n.id;
    o["name"] = n.name;
    o["attributes"] = n.attributes;
    objects.push_back(std::move(o));
  }
  ordered_json relations = ordered_json::array();
  for (const auto& r : graph.relations()) {
    ordered_json o;
    o["subject_id"] = r.subject_id;
    o["predicate"] = r.predicate;
    o["object_id"] = r.object_id;
    relations.push_back(std::move(o));
  }
  ordered_json doc;
  doc["objects"] = std::move(objects);
  doc["relations"] = std::move(relations);
  return doc;
}

// ---------------------------------------------------------------------------
// DSL

namespace {

struct DslPhrase {
  std::string name;
  std::vector<std::string> attributes;
  std::optional<std::string> id;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void dsl_error(std::size_t line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg, line, true);
}

DslPhrase parse_phrase(std::string_view raw, std::size_t line) {
  std::string text = trim(raw);
  DslPhrase out;
  if (auto at = text.rfind('@'); at != std::string::npos) {
    out.id = trim(std::string_view(text).substr(at + 1));
    if (out.id->empty()) dsl_error(line, "empty id after '@'");
    text = trim(std::string_view(text).substr(0, at));
  }
  auto open = text.find('(');
  auto close = text.rfind(')');
  if (open == std::string::npos && close == std::string::npos) {
    out.name = text;
  } else {
    if (open == std::string::npos || close == std::string::npos || close < open ||
        close != text.size() - 1) {
      dsl_error(line, "unbalanced attribute list in \"" + text + "\"");
    }
    out.name = trim(std::string_view(text).substr(0, open));
    std::string_view inner = std::string_view(text).substr(open + 1, close - open - 1);
    std::size_t start = 0;
    while (start <= inner.size()) {
      auto comma = inner.find(',', start);
      auto part = trim(inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start));
      if (part.empty()) dsl_error(line, "empty attribute in \"" + text + "\"");
      out.attributes.push_back(std::move(part));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  if (canonicalize_text(out.name).empty()) dsl_error(line, "missing node name");
  return out;
}

std::string phrase_identity(const DslPhrase& p) {
  std::string key = canonicalize_text(p.name);
  for (const auto& a : p.attributes) key += "\x1f" + canonicalize_text(a);
  return key;
}

struct DslLine {
  std::size_t number;
  DslPhrase subject;
  std::optional<std::string> predicate;
  std::optional<DslPhrase> object;
};

}  // namespace

SceneGraph parse_graph_dsl(std::string_view text, const ParseOptions& options, Warnings* warnings) {
  std::vector<DslLine> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++number;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (trim(raw).empty()) continue;

    auto arrow_open = raw.find("-[");
    if (arrow_open == std::string_view::npos) {
      if (raw.find("]->") != std::string_view::npos) dsl_error(number, "\"]->\" without \"-[\"");
      lines.push_back({number, parse_phrase(raw, number), std::nullopt, std::nullopt});
      continue;
    }
    auto arrow_close = raw.rfind("]->");
    if (arrow_close == std::string_view::npos || arrow_close < arrow_open + 2) {
      dsl_error(number, "expected \"subject -[predicate]-> object\"");
    }
    auto predicate = trim(raw.substr(arrow_open + 2, arrow_close - arrow_open - 2));
    if (predicate.empty()) dsl_error(number, "empty predicate");
    auto object_text = raw.substr(arrow_close + 3);
    if (trim(object_text).empty()) dsl_error(number, "missing object phrase");
    if (trim(raw.substr(0, arrow_open)).empty()) dsl_error(number, "missing subject phrase");
    lines.push_back({number, parse_phrase(raw.substr(0, arrow_open), number), predicate,
                     parse_phrase(object_text, number)});
  }

  // Explicit ids are reserved up front so automatic ids never collide with them.
  std::set<std::string> reserved;
  for (const auto& l : lines) {
    if (l.subject.id) reserved.insert(*l.subject.id);
    if (l.object && l.object->id) reserved.insert(*l.object->id);
  }

  std::vector<ObjectNode> objects;
  std::map<std::string, std::string> id_by_phrase;
  std::map<std::string, std::string> phrase_by_explicit_id;
  std::size_t next_auto = 1;

  auto resolve = [&](const DslPhrase& p, std::size_t line) -> std::string {
    auto identity = phrase_identity(p);
    if (p.id) {
      auto [it, inserted] = phrase_by_explicit_id.emplace(*p.id, identity);
      if (inserted) {
        objects.push_back({*p.id, p.name, p.attributes});
      } else if (it->second != identity) {
        dsl_error(line, "id \"" + *p.id + "\" reused for a different phrase");
      }
      return *p.id;
    }
    if (auto it = id_by_phrase.find(identity); it != id_by_phrase.end()) return it->second;
    std::string id;
    do {
      id = "o" + std::to_string(next_auto++);
    } while (reserved.contains(id));
    id_by_phrase.emplace(identity, id);
    objects.push_back({id, p.name, p.attributes});
    return id;
  };

  std::vector<RelationTriplet> relations;
  for (const auto& l : lines) {
    auto subject = resolve(l.subject, l.number);
    if (!l.predicate) continue;
    auto object = resolve(*l.object, l.number);
    relations.push_back({subject, *l.predicate, object});
  }
  return SceneGraph::create(std::move(objects), std::move(relations), options, warnings);
}

SceneGraph parse_graph(std::string_view text, GraphFormat format, const ParseOptions& options,
                       Warnings* warnings) {
  return format == GraphFormat::json ? parse_graph_json(text, options, warnings)
                                     : parse_graph_dsl(text, options, warnings);
}

namespace {

std::string dsl_phrase(const ObjectNode& n) {
  std::string out = n.name;
  if (!n.attributes.empty()) out += "(" + join(n.attributes, ",") + ")";
  return out;
}

std::string serialize_dsl(const SceneGraph& g) {
  std::map<std::string, int> phrase_count;
  for (const auto& n : g.objects()) ++phrase_count[dsl_phrase(n)];
  auto render = [&](const ObjectNode& n) {
    auto p = dsl_phrase(n);
    return phrase_count[p] > 1 ? p + "@" + n.id : p;
  };

  std::string out;
  std::unordered_set<std::string> referenced;
  for (const auto& r : g.relations()) {
    referenced.insert(r.subject_id);
    referenced.insert(r.object_id);
    out += render(g.node(r.subject_id)) + " -[" + r.predicate + "]-> " + render(g.node(r.object_id)) + "\n";
  }
  for (const auto& n : g.objects()) {
    if (!referenced.contains(n.id)) out += render(n) + "\n";
  }
  return out;
}

}  // namespace

std::string serialize_graph(const SceneGraph& graph, GraphFormat format) {
  if (format == GraphFormat::json) return graph_to_json(graph).dump();
  return serialize_dsl(graph);
}

// ---------------------------------------------------------------------------
// Model output

namespace {

// End index (inclusive) of the balanced object starting at `start`, honoring
// JSON string literals and escapes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

}  // namespace

SceneGraph extract_graph_from_model_text(std::string_view text, Warnings* warnings) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    auto end = balanced_end(text, start);
    if (!end) continue;
    auto candidate = text.substr(start, *end - start + 1);
    json doc = json::parse(candidate.begin(), candidate.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    return graph_from_json(doc, ParseOptions{.strict = false}, warnings);
  }
  throw ExtractionError("no JSON object found in model output", std::string(text));
}

}  // namespace venus
