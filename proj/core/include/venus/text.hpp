#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace venus {

/// Lowercases ASCII, trims, and collapses internal whitespace runs to a single
/// space. Idempotent. Non-ASCII bytes pass through unchanged.
std::string canonicalize_text(std::string_view raw);

/// Splits on ASCII whitespace and punctuation; returns the non-empty runs.
std::vector<std::string> split_words(std::string_view text);

/// 64-bit FNV-1a. Stable across platforms, used wherever a hash must be
/// reproducible (prompt embeddings, mock backend keys).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// One splitmix64 output step; used to derive independent seeds and keyed
/// byte streams from a single 64-bit value.
std::uint64_t splitmix64(std::uint64_t x);

std::string to_hex(std::string_view bytes);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string base64_encode(std::string_view bytes);
/// Throws ParseError on characters outside the standard alphabet.
std::string base64_decode(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace venus
