#pragma once
/// @file eval.hpp
/// @brief Ranking metrics, ablation switches, cost accounting, and reports.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "r3rec/io.hpp"

namespace r3rec {

/// 1-based position of `ground_truth`. Throws ProtocolError when absent.
std::size_t rank_of(std::span<const std::string> ranked, const std::string& ground_truth);

/// 1 iff the ground truth is within the first k. Throws InvalidInput for
/// k < 1 or an empty list, ProtocolError when the ground truth is absent.
int hr_at_k(std::span<const std::string> ranked, const std::string& ground_truth, std::size_t k);

/// 1 / log2(1 + rank) when rank <= k, else 0. Errors as hr_at_k().
double ndcg_at_k(std::span<const std::string> ranked, const std::string& ground_truth, std::size_t k);

struct AblationConfig {
    bool disable_item_semantics = false;
    bool disable_similar_users = false;
    bool disable_multilevel_intent = false;
    bool disable_polarity = false;

    bool any() const;
    /// "full", or the enabled switches joined by '+'.
    std::string name() const;
    /// Parses "full" or a '+'-separated list of switch names.
    static AblationConfig parse(const std::string& name);
};

struct PriceTable {
    double input_per_1k = 0.0005;
    double output_per_1k = 0.0015;
};

/// inputs / 1000 * rate_in + outputs / 1000 * rate_out.
double account_cost(std::size_t input_tokens, std::size_t output_tokens, const PriceTable& prices);

/// Outcome of one evaluation instance.
struct InstanceOutcome {
    std::string user_id;
    std::int64_t day_key = 0;
    std::string ground_truth;
    std::size_t rank = 0;  // 0 when the instance failed
    bool failed = false;
    std::string error;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t requests = 0;
    int max_output_request = 0;
};

struct MetricReport {
    double hr1 = 0.0, hr5 = 0.0, hr10 = 0.0, ndcg5 = 0.0;
    std::size_t n_instances = 0;  // successfully ranked
    std::size_t n_failed = 0;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string ablation = "full";
    std::string backend;
    std::string template_hash;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t requests = 0;
    int max_output_request = 0;
    double mean_input_per_request = 0.0;
    double mean_output_per_request = 0.0;
    double cost = 0.0;
    PriceTable prices;

    Json to_json() const;
    static MetricReport from_json(const Json& doc);
    /// Fixed-width plain-text table.
    std::string to_table() const;
};

/// Aggregates per-instance outcomes in order (failed instances excluded
/// from the metric means). Throws InvalidInput when nothing succeeded.
MetricReport aggregate_outcomes(std::span<const InstanceOutcome> outcomes, const PriceTable& prices);

struct SignTest {
    std::size_t wins = 0;    // a hit, b missed
    std::size_t losses = 0;  // b hit, a missed
    std::size_t ties = 0;
    double p_value = 1.0;    // two-sided exact binomial over non-ties
};

SignTest paired_sign_test(std::span<const int> hits_a, std::span<const int> hits_b);

/// Metric deltas of `other` against `base`: absolute (other - base) and
/// relative percent ((other - base) / base * 100, null when base is 0).
Json compare_reports(const MetricReport& base, const MetricReport& other);

}  // namespace r3rec
