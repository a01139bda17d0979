#include "r3rec/text.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <unordered_set>

namespace r3rec {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_segment_break(unsigned char c) {
    switch (c) {
        case '.': case ',': case ';': case ':': case '!': case '?': case '|':
        case '(': case ')': case '[': case ']': case '{': case '}':
        case '"': case '\n': case '\r':
            return true;
        default:
            return false;
    }
}

char lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

// English stopword snapshot (NLTK-style list, lowercase, apostrophes removed).
const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
        "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below",
        "between", "both", "but", "by", "can", "couldn", "d", "did", "didn", "do", "does",
        "doesn", "doing", "don", "down", "during", "each", "few", "for", "from", "further",
        "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
        "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it",
        "its", "itself", "just", "ll", "m", "ma", "me", "mightn", "more", "most", "mustn", "my",
        "myself", "needn", "no", "nor", "not", "now", "o", "of", "off", "on", "once", "only",
        "or", "other", "our", "ours", "ourselves", "out", "over", "own", "re", "s", "same",
        "shan", "she", "should", "shouldn", "so", "some", "such", "t", "than", "that", "the",
        "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
        "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was", "wasn",
        "we", "were", "weren", "what", "when", "where", "which", "while", "who", "whom", "why",
        "will", "with", "won", "wouldn", "y", "you", "your", "yours", "yourself", "yourselves",
        "also", "its", "via", "per"};
    return words;
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(lower(c));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            current.push_back(lower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::vector<std::string>> tokenize_segments(std::string_view text) {
    std::vector<std::vector<std::string>> segments(1);
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            segments.back().push_back(std::move(current));
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            current.push_back(lower(c));
            continue;
        }
        flush();
        if (is_segment_break(c) && !segments.back().empty()) segments.emplace_back();
    }
    flush();
    if (segments.back().empty()) segments.pop_back();
    return segments;
}

bool is_stopword(std::string_view token) { return stopwords().count(token) > 0; }

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

std::size_t estimate_tokens(std::string_view text) {
    std::size_t tokens = 0;
    std::size_t run = 0;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            ++run;
            continue;
        }
        tokens += (run + 3) / 4;
        run = 0;
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') ++tokens;
    }
    tokens += (run + 3) / 4;
    return tokens;
}

std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            break;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

}  // namespace r3rec
