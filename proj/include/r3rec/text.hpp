#pragma once
/// @file text.hpp
/// @brief Text normalization, tokenization, and stopwords.

#include <string>
#include <string_view>
#include <vector>

namespace r3rec {

/// Lowercases ASCII letters, collapses whitespace runs to one space, trims.
std::string normalize_text(std::string_view text);

/// Lowercased word tokens: maximal runs of ASCII alphanumerics or non-ASCII
/// bytes. Everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Like tokenize(), but sentence/list punctuation (. , ; : ! ? | brackets,
/// quotes, newlines) also closes the current segment. Phrase chunking never
/// merges across segments.
std::vector<std::vector<std::string>> tokenize_segments(std::string_view text);

bool is_stopword(std::string_view token);

/// Joins tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

/// Approximate BPE token count: each alphanumeric run costs ceil(len / 4)
/// tokens and every other non-space character costs one.
std::size_t estimate_tokens(std::string_view text);

/// Trims ASCII whitespace on both ends.
std::string_view trim(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

/// Fixed-point rendering with `decimals` digits ("%.3f" for 3).
std::string format_fixed(double value, int decimals);

}  // namespace r3rec
