#pragma once
/// @file intent.hpp
/// @brief Multi-level recent intent: recency-decayed signed category
/// evidence, contrastive softmax weights, and the user intent vector.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "r3rec/corpus.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/io.hpp"

namespace r3rec {

/// Category that collects events whose item is missing from the catalog or
/// has no categories.
inline constexpr const char* kUnknownCategory = "\xE2\x8A\xA5unknown";

inline constexpr double kDaysPerMonth = 30.0;

/// Exponential recency kernel rho(delta) = 2^(-delta / half_life).
struct DecayKernel {
    double half_life_days = 30.0;

    /// `delta_seconds` must be >= 0.
    double operator()(double delta_seconds) const;
};

struct CategoryEvidence {
    double positive = 0.0;
    double negative = 0.0;

    double net() const { return positive - negative; }
};

using EvidenceMap = std::map<std::string, CategoryEvidence>;
using WeightMap = std::map<std::string, double>;
using RankedWeights = std::vector<std::pair<std::string, double>>;

/// g_k^(+/-) over the window: every event adds rho(t_ref - t_j) to each of
/// its item's categories on the side of its sign. Throws InvalidInput if an
/// event is newer than `reference_time`.
EvidenceMap signed_evidence(std::span<const InteractionEvent> window, const Catalog& catalog,
                            const DecayKernel& kernel, std::int64_t reference_time);

/// Softmax of kappa * (g+ - g-) over the evidence categories (max-shifted).
WeightMap intent_weights(const EvidenceMap& evidence, double kappa);

/// Uniform weights over the evidence categories (multi-level intent ablation).
WeightMap uniform_intent_weights(const EvidenceMap& evidence);

/// z_u = sum_k pi_k e_k. Throws InvalidInput for a category without an embedding.
Embedding intent_vector(const WeightMap& weights, const std::map<std::string, Embedding>& category_embeddings);

/// Sorted by weight descending, ties by category id; at most n entries.
RankedWeights top_intents(const WeightMap& weights, std::size_t n);

struct IntentConfig {
    double kappa = 1.0;
    double half_life_days = 30.0;
    std::size_t n_intent = 3;
    double window_months = 12.0;  // E_u^rec spans at most this far back
    std::size_t h_max = 100;      // ...and at most this many events
};

/// The recent window: the last h_max events no older than window_months
/// before `reference_time`. `history` must be time-ordered.
std::span<const InteractionEvent> recent_window(std::span<const InteractionEvent> history,
                                                std::int64_t reference_time, double window_months,
                                                std::size_t h_max);

struct IntentProfile {
    std::string user_id;
    std::int64_t reference_time = 0;
    std::size_t window_events = 0;
    EvidenceMap evidence;
    WeightMap weights;
    double kappa = 1.0;
    Embedding intent_vector;
    RankedWeights top_intents;
};

/// Builds the profile from a time-ordered history with t_ref = the last
/// event's timestamp. Empty history yields an empty profile with a zero
/// intent vector. `uniform` swaps in uniform weights.
IntentProfile build_intent_profile(const std::string& user_id, std::span<const InteractionEvent> history,
                                   const Catalog& catalog, const EmbeddingProvider& provider,
                                   const IntentConfig& config, bool uniform = false);

Json intent_profile_to_json(const IntentProfile& profile);
IntentProfile intent_profile_from_json(const Json& row);

}  // namespace r3rec
