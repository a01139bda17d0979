#pragma once
/// @file memory.hpp
/// @brief Similar-user memory: per-user textual sketches with a dense and a
/// sparse view, hybrid BM25 + cosine retrieval, and MMR re-ranking.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "r3rec/corpus.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/intent.hpp"
#include "r3rec/io.hpp"
#include "r3rec/polarity.hpp"

namespace r3rec {

using TokenBag = std::map<std::string, std::uint32_t>;

struct UserSketch {
    std::string user_id;
    std::string text;
    Embedding dense;
    TokenBag sparse;
};

struct SketchConfig {
    std::size_t n_keyphrases = 20;
};

/// "intents: k1, k2 | likes: p1, p2, ..." with intents in weight order and
/// liked keyphrases from the most recent positive events first (distinct,
/// capped). The sparse view counts the word tokens of every liked keyphrase
/// and of the intents. An empty history gives "intents: none" and a zero
/// dense view.
UserSketch build_sketch(const std::string& user_id, const IntentProfile& profile,
                        std::span<const InteractionEvent> history, const ItemKeywords& item_keywords,
                        const EmbeddingProvider& provider, const SketchConfig& config = {});

/// The "likes" list of a sketch (used when rendering neighbors).
std::vector<std::string> sketch_likes(const std::string& text);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct Neighbor {
    std::string user_id;
    double sim = 0.0;
    double bm25 = 0.0;
    double cosine = 0.0;
};

struct RetrievalConfig {
    std::size_t k = 10;
    double lambda_mix = 0.5;
    double bm25_cutoff = 0.25;  // on normalized BM25; 0 disables filtering
    double lambda_mmr = 0.7;
    std::size_t m_out = 3;

    void validate() const;
};

struct RetrievalResult {
    std::vector<Neighbor> ranked;       // sim non-increasing, ties by user_id
    std::vector<std::string> mmr_order;  // at most m_out ids
};

/// lambda * bm25 / z_bm + (1 - lambda) * cosine.
double hybrid_similarity(double bm25, double z_bm, double cosine, double lambda_mix);

/// Okapi BM25 term weight for one query token.
double bm25_term(double idf, double tf, double doc_length, double avg_length, const Bm25Params& params);

/// Indices into `ids` in MMR order: first the highest sim, then repeatedly
/// the argmax of lambda * sim - (1 - lambda) * max cos to the picks so far.
/// Ties go to the smaller id.
std::vector<std::size_t> mmr_order(std::span<const double> sims, std::span<const Embedding> embeddings,
                                   std::span<const std::string> ids, double lambda_mmr, std::size_t m_out);

/// Two-phase index: add() sketches, freeze(), then query from any thread.
class MemoryIndex {
public:
    explicit MemoryIndex(Bm25Params params = {}) : params_(params) {}

    /// Throws InvalidInput after freeze() or for a duplicate user.
    void add(UserSketch sketch);
    void freeze();
    bool frozen() const { return frozen_; }

    std::size_t size() const { return entries_.size(); }
    const std::vector<UserSketch>& entries() const { return entries_; }
    const UserSketch* find(const std::string& user_id) const;
    const Bm25Params& params() const { return params_; }

    double average_length() const;
    std::size_t document_length(std::size_t doc) const;
    std::size_t document_frequency(const std::string& token) const;
    /// ln(1 + (N - df + 0.5) / (df + 0.5)).
    double idf(const std::string& token) const;
    const std::vector<Posting>& postings(const std::string& token) const;
    std::vector<std::string> vocabulary() const;  // sorted

    /// BM25 of the query against one document, summing over the distinct
    /// query tokens in sorted order.
    double bm25(const TokenBag& query, std::size_t doc) const;

    /// Neighbors of an indexed user (never the user itself).
    RetrievalResult retrieve(const std::string& user_id, const RetrievalConfig& config) const;
    /// Neighbors for an arbitrary sketch; entries with the same user_id are
    /// excluded.
    RetrievalResult retrieve_for(const UserSketch& query, const RetrievalConfig& config) const;

    /// Writes sketches.jsonl, postings.bin and stats.json into `dir`.
    void save(const std::filesystem::path& dir, std::uint64_t build_seed, const EmbeddingProvider& provider) const;
    /// Rebuilds from sketches.jsonl and checks postings.bin against the
    /// rebuilt postings; throws ParseError on any mismatch.
    static MemoryIndex load(const std::filesystem::path& dir);

private:
    void require_frozen() const;

    Bm25Params params_;
    bool frozen_ = false;
    std::vector<UserSketch> entries_;
    std::unordered_map<std::string, std::size_t> by_user_;
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::size_t> lengths_;
    double avg_length_ = 0.0;
};

Json sketch_to_json(const UserSketch& sketch);
UserSketch sketch_from_json(const Json& row);

}  // namespace r3rec
