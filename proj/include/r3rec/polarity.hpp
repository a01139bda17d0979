#pragma once
/// @file polarity.hpp
/// @brief Long/short-horizon keyword polarity and the fused query state.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "r3rec/corpus.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/intent.hpp"
#include "r3rec/io.hpp"

namespace r3rec {

struct HorizonConfig {
    double short_months = 1.0;
    double long_months = 12.0;

    /// Throws InvalidInput unless 0 < short < long.
    void validate() const;
};

/// item_id -> the item's keyphrases (the keyword universe).
using ItemKeywords = std::unordered_map<std::string, std::vector<std::string>>;

/// Smoothed inverse document frequency of keyphrases over the catalog:
/// idf(w) = ln((N + 1) / (df(w) + 1)) + 1.
class KeywordIdf {
public:
    KeywordIdf() = default;
    KeywordIdf(const ItemKeywords& item_keywords, std::size_t catalog_size);

    double idf(const std::string& keyword) const;
    std::size_t document_count() const { return n_items_; }

private:
    std::size_t n_items_ = 0;
    std::unordered_map<std::string, std::size_t> df_;
};

struct SignedWeights {
    std::map<std::string, double> positive;
    std::map<std::string, double> negative;
};

/// omega(w) = [sum over events whose item carries w of rho(t_ref - t_e)] * idf(w),
/// accumulated separately per event sign.
SignedWeights time_aware_tfidf(std::span<const InteractionEvent> horizon_events, const ItemKeywords& item_keywords,
                               const KeywordIdf& idf, const DecayKernel& kernel, std::int64_t reference_time);

struct PolarityVectors {
    Embedding positive_centroid;
    Embedding negative_centroid;
    Embedding polarity;  // positive_centroid - negative_centroid
};

using EmbedFn = std::function<Embedding(const std::string&)>;

/// Weighted centroids per sign and their difference. An empty side (or one
/// whose weights sum to zero) has a zero centroid.
PolarityVectors polarity_vector(const SignedWeights& weights, const EmbedFn& embed, std::size_t dimension);

/// Keywords of one sign ranked by weight (descending, ties by text), top n.
RankedWeights top_keywords(const std::map<std::string, double>& weights, std::size_t n);

struct HorizonPolarity {
    std::size_t events = 0;
    SignedWeights weights;
    PolarityVectors vectors;
};

struct PolarityState {
    std::string user_id;
    HorizonPolarity short_term;
    HorizonPolarity long_term;
    RankedWeights top_positive;  // K_u^+ ranked by short + long weight
    RankedWeights top_negative;  // K_u^-
};

struct PolarityConfig {
    HorizonConfig horizons;
    double half_life_days = 30.0;
    std::size_t n_keywords = 5;
};

/// Mines both horizons from a time-ordered history (t_ref = last event).
PolarityState build_polarity_state(const std::string& user_id, std::span<const InteractionEvent> history,
                                   const ItemKeywords& item_keywords, const KeywordIdf& idf,
                                   const EmbeddingProvider& provider, const PolarityConfig& config);

/// Zero polarity vectors and empty keyword lists (polarity ablation).
PolarityState empty_polarity_state(const std::string& user_id, std::size_t dimension);

Json polarity_state_to_json(const PolarityState& state);
PolarityState polarity_state_from_json(const Json& row);

// ---------------------------------------------------------------------------
// Fusion adapter

/// Block-affine map h = W_z z + W_S q_S + W_L q_L + b, i.e. W_h [z; q_S; q_L] + b.
struct FusionAdapter {
    Eigen::MatrixXd w_intent;  // d_h x d
    Eigen::MatrixXd w_short;
    Eigen::MatrixXd w_long;
    Eigen::VectorXd bias;      // d_h

    std::size_t input_dim() const { return static_cast<std::size_t>(w_intent.cols()); }
    std::size_t fused_dim() const { return static_cast<std::size_t>(w_intent.rows()); }

    /// Rectangular identity blocks (ones on the main diagonal), zero bias.
    static FusionAdapter identity(std::size_t input_dim, std::size_t fused_dim);
    /// Seeded Gaussian blocks with scale 1/sqrt(input_dim), zero bias.
    static FusionAdapter random(std::size_t input_dim, std::size_t fused_dim, std::uint64_t seed);

    Json to_json(const std::string& config_hash) const;
    static FusionAdapter from_json(const Json& doc);
};

/// Throws InvalidInput on a dimension mismatch.
Embedding fuse(const Embedding& intent, const Embedding& short_polarity, const Embedding& long_polarity,
               const FusionAdapter& adapter);

struct AlignmentSample {
    Eigen::VectorXd intent;
    Eigen::VectorXd short_polarity;
    Eigen::VectorXd long_polarity;
};

AlignmentSample make_alignment_sample(const Embedding& intent, const Embedding& short_polarity,
                                      const Embedding& long_polarity);

/// L_align = -(1/|U|) sum_u sum_{l in S,L} cos(W_z z_u, W_l q_u^l). Pairs with a
/// zero projection contribute 0.
double alignment_loss(const FusionAdapter& adapter, std::span<const AlignmentSample> samples);

struct AdapterGradient {
    Eigen::MatrixXd d_intent;
    Eigen::MatrixXd d_short;
    Eigen::MatrixXd d_long;
};

/// Analytic gradient of alignment_loss() with respect to each block.
AdapterGradient alignment_gradient(const FusionAdapter& adapter, std::span<const AlignmentSample> samples);

struct AdapterTrainConfig {
    double learning_rate = 1e-3;
    int epochs = 200;
    std::uint64_t seed = 0;
    std::size_t fused_dim = 256;
    bool identity_init = false;
};

struct AdapterTrainResult {
    FusionAdapter adapter;
    std::vector<double> loss_trace;  // initial loss, then one entry per epoch
    std::vector<std::string> warnings;
};

/// Full-batch gradient descent on L_align. With no sample carrying a
/// nonzero intent vector the initialization is returned with a warning.
AdapterTrainResult train_adapter(std::span<const AlignmentSample> samples, std::size_t input_dim,
                                 const AdapterTrainConfig& config);

}  // namespace r3rec
