#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "venus/graph_edit.hpp"
#include "venus/scene_graph.hpp"

namespace venus {

inline constexpr std::size_t kDefaultMaxTokens = 77;
inline constexpr std::size_t kDefaultMaxRelations = 15;
inline constexpr std::string_view kPhraseSeparator = ", ";

struct TokenBudget {
  std::size_t max_tokens = kDefaultMaxTokens;
  std::size_t max_relations = kDefaultMaxRelations;
  std::string counter = "approx";

  /// Throws ConfigError on zero limits or an unregistered counter.
  void validate() const;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Registers a named token counting strategy (e.g. an exact tokenizer).
/// Thread-safe. Re-registering a name replaces it; "approx" is built in.
void register_token_counter(std::string name, TokenCounter counter);
bool has_token_counter(std::string_view name);

/// The "approx" strategy is ceil(1.3 * words) + 2, where words are runs
/// between whitespace and punctuation and the +2 covers start/end sentinels.
/// Unknown strategies throw ConfigError.
std::size_t estimate_tokens(std::string_view text, std::string_view counter = "approx");

/// "<subject phrase> <predicate> <object phrase>".
std::string render_phrase(const RelationTriplet& triplet, const SceneGraph& graph);

struct DroppedRelation {
  TripletText triplet;
  std::string segment;  // "new" or "bgd"
  std::string reason;   // "relation cap" or "token budget"
};

struct CaptionResult {
  std::string caption;
  std::vector<RelationTriplet> kept;
  std::vector<DroppedRelation> dropped;
};

/// Joins phrases with ", ". Once the relation cap or token budget is hit the
/// remaining trailing relations are dropped; order is never changed.
CaptionResult compile_caption(std::span<const RelationTriplet> relations, const SceneGraph& graph,
                              const TokenBudget& budget, std::string_view segment = "new");

struct TokenCounts {
  std::size_t src = 0;
  std::size_t tgt = 0;
  std::size_t tgt_new = 0;
  std::size_t tgt_bgd = 0;
};

struct PromptBundle {
  std::string src_caption;
  std::string tgt_new_caption;
  std::string tgt_bgd_caption;
  std::string tgt_caption;
  TokenCounts token_counts;
  std::vector<DroppedRelation> truncated;
};

/// Split-prompt compilation: new content from G' \ G, background from G ∩ G',
/// target = new then background, source = background. Background phrases give
/// way first when the combined target caption would exceed the budget.
PromptBundle compile_bundle(const SceneGraph& source, const SceneGraph& target, const TokenBudget& budget = {});

/// Concatenates the non-empty parts with the phrase separator.
std::string concat_captions(std::string_view first, std::string_view second);

nlohmann::ordered_json bundle_to_json(const PromptBundle& bundle);
/// Canonical on-disk/API byte form: two-space indented JSON plus newline.
std::string serialize_bundle(const PromptBundle& bundle);

}  // namespace venus
