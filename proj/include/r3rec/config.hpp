#pragma once
/// @file config.hpp
/// @brief Pipeline configuration: INI-style file, command-line overrides,
/// validation, and stable hashing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "r3rec/eval.hpp"

namespace r3rec {

struct PipelineConfig {
    // [data]
    std::string interactions;
    std::string items;
    std::string format = "auto";  // auto | delimited | jsonl
    double sign_threshold = 4.0;
    bool implicit_feedback = false;
    bool strict = false;

    // [protocol]
    double split_train = 0.8;
    double split_valid = 0.1;
    double split_test = 0.1;
    std::size_t pool_size = 20;
    std::size_t h_max = 100;
    std::size_t max_instances = 0;  // 0: every eligible test session

    // [intent]
    std::size_t n_intent = 3;
    double kappa = 1.0;
    double half_life_days = 30.0;
    double window_months = 12.0;

    // [polarity]
    double short_months = 1.0;
    double long_months = 12.0;
    std::size_t n_keywords = 5;
    std::size_t fused_dim = 256;
    double adapter_lr = 1e-3;
    int adapter_epochs = 200;
    bool skip_adapter = false;

    // [itemsem]
    std::size_t budget_min = 5;
    std::size_t budget_max = 8;
    double lambda_cov = 0.5;
    double alpha = 0.5;
    double eps_gain = 0.05;
    double tau_pmi = 1.0;
    std::size_t max_phrase_tokens = 6;
    bool abstractive = true;

    // [memory]
    std::size_t k = 10;
    double lambda_mix = 0.5;
    double bm25_cutoff = 0.25;
    double lambda_mmr = 0.7;
    std::size_t m_out = 3;
    std::size_t sketch_keyphrases = 20;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;

    // [judge]
    std::string backend = "mock";  // mock | live
    double judge_temperature = 0.0;
    int max_tokens = 20;
    double calib_t = 1.0;
    bool batched = true;
    std::size_t max_in_flight = 4;
    std::string templates_dir;

    // [embedding]
    std::string embedder = "hashed";  // hashed | remote
    std::size_t dimension = 384;
    std::string cache_dir;

    // [cost]
    double price_input_per_1k = 0.0005;
    double price_output_per_1k = 0.0015;

    // [ablation]
    bool disable_item_semantics = false;
    bool disable_similar_users = false;
    bool disable_multilevel_intent = false;
    bool disable_polarity = false;

    // [run]
    unsigned long long seed = 42;
    std::string out = "r3rec-out";
    std::size_t workers = 4;
    bool trace = true;

    // [sweep]
    std::string sweep_grid;  // "section.key=v1,v2;section.key=v1,v2"
    bool sweep_cache = true;

    /// Sets "section.key" from text. Throws InvalidInput for unknown keys or
    /// unparseable values.
    void set(const std::string& dotted_key, const std::string& value);
    /// The value of "section.key" rendered canonically.
    std::string get(const std::string& dotted_key) const;
    /// Every known "section.key", sorted.
    static std::vector<std::string> keys();

    /// Range checks for every knob; throws InvalidInput listing the first
    /// violation.
    void validate() const;

    /// Canonical "section.key = value" lines, sorted.
    std::string canonical() const;
    /// FNV-1a of canonical() restricted to `sections` (all when empty).
    std::string hash(const std::vector<std::string>& sections = {}) const;

    AblationConfig ablation() const;
    void set_ablation(const AblationConfig& a);
    PriceTable prices() const { return {price_input_per_1k, price_output_per_1k}; }
};

/// Parses "[section]" headers and "key = value" lines; '#' and ';' start
/// comments. Keys outside a section are rejected, as are unknown keys.
void apply_config_text(PipelineConfig& config, const std::string& text);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

/// Expands a sweep grid into one override list per grid point (cartesian
/// product, first key varying slowest).
std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::string& grid);

}  // namespace r3rec
