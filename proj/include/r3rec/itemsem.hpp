#pragma once
/// @file itemsem.hpp
/// @brief Item keyphrase distillation: PMI chunking plus abstractive tags
/// form a candidate pool, and a budgeted facility-location greedy picks the
/// item card.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "r3rec/corpus.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/io.hpp"
#include "r3rec/llm.hpp"
#include "r3rec/polarity.hpp"
#include "r3rec/templates.hpp"

namespace r3rec {

enum class PhraseSource { kChunked, kAbstractive, kTitle };

std::string_view phrase_source_name(PhraseSource source);

struct KeyphraseCandidate {
    std::string text;  // normalized, <= 6 tokens
    PhraseSource source = PhraseSource::kChunked;
    double relevance = 0.0;
    Embedding embedding;
};

struct ItemCard {
    std::string item_id;
    std::vector<KeyphraseCandidate> keyphrases;  // in selection order
    double objective_value = 0.0;
    std::size_t pool_size = 0;

    std::vector<std::string> texts() const;
};

/// The text an item is chunked from: title, then description.
std::string item_text(const ItemMeta& item);

/// Token statistics over the item-text corpus. Stopwords are excluded;
/// bigrams are counted only between adjacent content tokens inside one
/// segment with no stopword between them.
class CorpusStats {
public:
    void add_document(std::string_view text);
    static CorpusStats from_catalog(const Catalog& catalog);

    std::size_t unigram(const std::string& token) const;
    std::size_t bigram(const std::string& a, const std::string& b) const;
    std::size_t total_tokens() const { return total_tokens_; }
    std::size_t documents() const { return documents_; }
    std::size_t document_frequency(const std::string& token) const;

    /// ln(N * c(ab) / (c(a) c(b))) with N = total content tokens; -inf when
    /// the bigram never occurs.
    double pmi(const std::string& a, const std::string& b) const;
    /// ln((D + 1) / (df + 1)) + 1 over documents.
    double idf(const std::string& token) const;

private:
    std::unordered_map<std::string, std::size_t> unigrams_;
    std::unordered_map<std::string, std::size_t> bigrams_;  // "a\x1fb"
    std::unordered_map<std::string, std::size_t> df_;
    std::size_t total_tokens_ = 0;
    std::size_t documents_ = 0;
};

/// Runs of content tokens: segments split further at stopwords.
std::vector<std::vector<std::string>> content_runs(std::string_view text);

struct ChunkConfig {
    double tau_pmi = 1.0;
    std::size_t max_phrase_tokens = 6;
};

/// Phrases (C_i): inside each content run, adjacent phrases merge while the
/// PMI of the tokens meeting at the boundary is >= tau and the result stays
/// within max_phrase_tokens. Deduplicated, in order of first appearance.
std::vector<std::string> pmi_chunk(std::string_view text, const CorpusStats& stats, const ChunkConfig& config = {});

/// tf * idf of each content token of `text`.
std::map<std::string, double> item_tfidf(std::string_view text, const CorpusStats& stats);

/// Parses a comma/newline separated tag list: strips bullets and numbering,
/// normalizes, drops tags longer than max_tokens, deduplicates, keeps at
/// most max_tags.
std::vector<std::string> parse_tag_list(std::string_view response, std::size_t max_tags = 10,
                                        std::size_t max_tokens = 6);

/// Abstractive tags (L_i) from the tagger LLM. A failed request or an
/// unusable reply yields an empty list and a warning.
std::vector<std::string> abstractive_tags(const ItemMeta& item, const LlmClient& client,
                                          const TemplateRegistry& templates, std::vector<std::string>* warnings);

/// psi(c) = alpha * tfidf_norm + (1 - alpha) * max(0, cos(v_c, centroid)),
/// tfidf_norm = mean member-token tf-idf divided by the item's maximum.
double relevance_score(std::string_view candidate, const std::map<std::string, double>& tfidf,
                       const Embedding& candidate_embedding, const Embedding& item_centroid, double alpha);

/// F(S) = sum_{c in S} psi(c) + lambda * sum_{q in U} max(0, max_{c in S} cos(v_q, v_c)).
/// The clip at zero keeps the coverage term monotone submodular for any
/// embedding geometry.
class FacilityLocation {
public:
    FacilityLocation(std::vector<double> relevance, std::span<const Embedding> embeddings, double lambda);

    std::size_t size() const { return relevance_.size(); }
    double relevance(std::size_t c) const { return relevance_[c]; }
    double similarity(std::size_t q, std::size_t c) const { return sim_[q * size() + c]; }
    double lambda() const { return lambda_; }

    double value(std::span<const std::size_t> selected) const;
    double gain(std::size_t candidate, std::span<const std::size_t> selected) const;

private:
    std::vector<double> relevance_;
    std::vector<double> sim_;
    double lambda_;
};

struct SelectionConfig {
    std::size_t budget_min = 5;
    std::size_t budget_max = 8;
    double lambda_cov = 0.5;
    double eps_gain = 0.05;

    void validate() const;
};

struct GreedyResult {
    std::vector<std::size_t> selected;  // in pick order
    std::vector<double> values;         // F after each pick
};

/// Greedy maximization of F. Ties in marginal gain (within 1e-12) go to the
/// higher relevance, then the lexicographically smaller text. Stops at
/// budget_max, or once budget_min is reached and the best gain < eps_gain.
/// Pools smaller than budget_min are taken whole. A text already selected
/// is never picked again.
GreedyResult greedy_select(const FacilityLocation& objective, std::span<const std::string> texts,
                           const SelectionConfig& config);

/// Runs greedy_select() over a scored pool. Empty pool: empty card.
ItemCard select_keyphrases(const std::string& item_id, std::vector<KeyphraseCandidate> pool,
                           const SelectionConfig& config);

struct DistillConfig {
    SelectionConfig selection;
    ChunkConfig chunk;
    double alpha = 0.5;
    std::size_t centroid_tokens = 10;
};

/// Full distillation of one item. `tagger` may be null (chunked phrases only).
ItemCard distill_item(const ItemMeta& item, const CorpusStats& stats, const EmbeddingProvider& provider,
                      const LlmClient* tagger, const TemplateRegistry& templates, const DistillConfig& config,
                      std::vector<std::string>* warnings);

/// Stand-in card built from the distinct content tokens of the title.
ItemCard title_token_card(const ItemMeta& item, const EmbeddingProvider& provider);

Json card_to_json(const ItemCard& card);
/// Embeddings are not stored; they are recomputed with `provider`.
ItemCard card_from_json(const Json& row, const EmbeddingProvider& provider);

/// item_id -> keyphrase texts, the keyword universe for polarity mining.
ItemKeywords card_keywords(std::span<const ItemCard> cards);

}  // namespace r3rec
