#pragma once
/// @file synthetic.hpp
/// @brief Generator for a small corpus with planted preference structure.
///
/// Items belong to themes, each theme owning a handful of pseudo-word
/// keywords that appear in item descriptions. Users belong to clusters; a
/// cluster likes three themes and dislikes one. Each user's history shows
/// only two of the three liked themes, so the third is visible only through
/// similar users. Titles are drawn from a theme-independent noise vocabulary.

#include <cstdint>
#include <filesystem>
#include <string>

namespace r3rec {

struct SyntheticConfig {
    std::size_t users = 300;
    std::size_t items = 500;
    std::size_t themes = 20;
    std::size_t keywords_per_theme = 8;
    std::size_t categories = 5;
    std::size_t clusters = 10;
    std::size_t sessions_per_user = 8;
    /// Probability that a final-session target comes from the hidden theme.
    double hidden_target_rate = 0.5;
    double dislike_rate = 0.2;
    std::int64_t base_timestamp = 1600000000;
    std::uint64_t seed = 7;
};

struct SyntheticFiles {
    std::filesystem::path interactions;  // ML-1M style "user::item::rating::timestamp"
    std::filesystem::path items;         // JSON lines
    std::filesystem::path config;        // INI pointing at both
    std::size_t events = 0;
};

SyntheticFiles generate_synthetic(const SyntheticConfig& config, const std::filesystem::path& dir);

}  // namespace r3rec
