#include "venus/prompt_compiler.hpp"

#include <map>
#include <mutex>
#include <shared_mutex>

#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus {

using ordered_json = nlohmann::ordered_json;

namespace {

std::size_t approx_tokens(std::string_view text) {
  const std::size_t words = split_words(text).size();
  // ceil(1.3 * words) in integers; 1.3 * 10 is not exactly 13 in binary.
  return (13 * words + 9) / 10 + 2;
}

struct CounterRegistry {
  std::shared_mutex mutex;
  std::map<std::string, TokenCounter, std::less<>> counters{{"approx", approx_tokens}};
};

CounterRegistry& registry() {
  static CounterRegistry r;
  return r;
}

}  // namespace

void register_token_counter(std::string name, TokenCounter counter) {
  auto& r = registry();
  std::unique_lock lock(r.mutex);
  r.counters.insert_or_assign(std::move(name), std::move(counter));
}

bool has_token_counter(std::string_view name) {
  auto& r = registry();
  std::shared_lock lock(r.mutex);
  return r.counters.find(name) != r.counters.end();
}

std::size_t estimate_tokens(std::string_view text, std::string_view counter) {
  TokenCounter fn;
  {
    auto& r = registry();
    std::shared_lock lock(r.mutex);
    auto it = r.counters.find(counter);
    if (it == r.counters.end()) throw ConfigError("unknown token counter \"" + std::string(counter) + "\"");
    fn = it->second;
  }
  return fn(text);
}

void TokenBudget::validate() const {
  if (max_tokens < 1) throw ConfigError("token budget max_tokens must be >= 1");
  if (max_relations < 1) throw ConfigError("token budget max_relations must be >= 1");
  if (!has_token_counter(counter)) throw ConfigError("unknown token counter \"" + counter + "\"");
}

std::string render_phrase(const RelationTriplet& triplet, const SceneGraph& graph) {
  return graph.key(triplet).phrase();
}

std::string concat_captions(std::string_view first, std::string_view second) {
  if (first.empty()) return std::string(second);
  if (second.empty()) return std::string(first);
  std::string out(first);
  out += kPhraseSeparator;
  out += second;
  return out;
}

namespace {

// Greedy prefix packing shared by single captions and the background segment.
// `prefix` is caption text that precedes this segment in the submitted prompt
// and `prefix_relations` the relations it already holds.
CaptionResult pack(std::span<const RelationTriplet> relations, const SceneGraph& graph, const TokenBudget& budget,
                   std::string_view segment, std::string_view prefix, std::size_t prefix_relations) {
  CaptionResult out;
  const char* stop_reason = nullptr;
  for (const auto& rel : relations) {
    if (!stop_reason) {
      const auto phrase = render_phrase(rel, graph);
      const auto candidate = concat_captions(out.caption, phrase);
      if (prefix_relations + out.kept.size() >= budget.max_relations) {
        stop_reason = "relation cap";
      } else if (estimate_tokens(concat_captions(prefix, candidate), budget.counter) > budget.max_tokens) {
        stop_reason = "token budget";
      } else {
        out.caption = candidate;
        out.kept.push_back(rel);
        continue;
      }
    }
    out.dropped.push_back({to_text(graph.key(rel)), std::string(segment), stop_reason});
  }
  return out;
}

}  // namespace

CaptionResult compile_caption(std::span<const RelationTriplet> relations, const SceneGraph& graph,
                              const TokenBudget& budget, std::string_view segment) {
  budget.validate();
  return pack(relations, graph, budget, segment, {}, 0);
}

PromptBundle compile_bundle(const SceneGraph& source, const SceneGraph& target, const TokenBudget& budget) {
  budget.validate();
  const auto split = split_graphs(source, target);
  const auto fresh = pack(split.new_relations, target, budget, "new", {}, 0);
  const auto bgd = pack(split.bgd_relations, target, budget, "bgd", fresh.caption, fresh.kept.size());

  PromptBundle b;
  b.tgt_new_caption = fresh.caption;
  b.tgt_bgd_caption = bgd.caption;
  b.tgt_caption = concat_captions(b.tgt_new_caption, b.tgt_bgd_caption);
  b.src_caption = b.tgt_bgd_caption;
  b.token_counts = {estimate_tokens(b.src_caption, budget.counter), estimate_tokens(b.tgt_caption, budget.counter),
                    estimate_tokens(b.tgt_new_caption, budget.counter),
                    estimate_tokens(b.tgt_bgd_caption, budget.counter)};
  b.truncated = fresh.dropped;
  b.truncated.insert(b.truncated.end(), bgd.dropped.begin(), bgd.dropped.end());
  return b;
}

ordered_json bundle_to_json(const PromptBundle& b) {
  ordered_json doc;
  doc["src"] = b.src_caption;
  doc["tgt"] = b.tgt_caption;
  doc["tgt_new"] = b.tgt_new_caption;
  doc["tgt_bgd"] = b.tgt_bgd_caption;
  doc["token_counts"] = {{"src", b.token_counts.src},
                         {"tgt", b.token_counts.tgt},
                         {"tgt_new", b.token_counts.tgt_new},
                         {"tgt_bgd", b.token_counts.tgt_bgd}};
  doc["truncated"] = ordered_json::array();
  for (const auto& d : b.truncated) {
    ordered_json t;
    t["segment"] = d.segment;
    t["subject"] = d.triplet.subject;
    t["predicate"] = d.triplet.predicate;
    t["object"] = d.triplet.object;
    t["reason"] = d.reason;
    doc["truncated"].push_back(std::move(t));
  }
  return doc;
}

std::string serialize_bundle(const PromptBundle& bundle) { return bundle_to_json(bundle).dump(2) + "\n"; }

}  // namespace venus
